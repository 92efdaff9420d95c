#pragma once

#include <map>
#include <string>
#include <vector>

#include "afif4/facepatch.hpp"
#include "afif4/linalg.hpp"

namespace afif4 {

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
    friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

// Unknown region for the membrane in-fill. The boundary is exactly the
// set of 4-neighbors of interior pixels that are not interior, so every
// interior pixel has all four neighbors in interior-or-boundary.
struct FogRegion {
    std::vector<PixelCoord> interior;
    std::vector<PixelCoord> boundary;

    bool empty() const { return interior.empty(); }
};

enum class MembraneMethod { DirectDense, GaussSeidel, ConjugateGradient };

struct MembraneSolveConfig {
    MembraneMethod method = MembraneMethod::ConjugateGradient;
    double tolerance = 1e-6;  // residual max-norm bound
    int max_iterations = 10000;
};

inline MembraneMethod membrane_method_from_name(const std::string& name) {
    if (name == "cg") return MembraneMethod::ConjugateGradient;
    if (name == "gs") return MembraneMethod::GaussSeidel;
    if (name == "dense") return MembraneMethod::DirectDense;
    throw Error("unknown membrane method '" + name + "' (cg|gs|dense)");
}

// Throws unless the region satisfies its structural invariants for a
// w x h image.
inline void validate_fog_region(const FogRegion& region, int w, int h) {
    std::map<PixelCoord, int> kind;  // 1 interior, 2 boundary
    for (const PixelCoord& p : region.interior) {
        if (p.x < 0 || p.y < 0 || p.x >= w || p.y >= h) throw Error("fog region: interior out of bounds");
        if (!kind.emplace(p, 1).second) throw Error("fog region: duplicate interior pixel");
    }
    for (const PixelCoord& p : region.boundary) {
        if (p.x < 0 || p.y < 0 || p.x >= w || p.y >= h) throw Error("fog region: boundary out of bounds");
        if (!kind.emplace(p, 2).second) throw Error("fog region: boundary overlaps interior or repeats");
    }
    if (!region.interior.empty() && region.boundary.empty())
        throw Error("fog region: non-empty interior with empty boundary");
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (const PixelCoord& p : region.interior)
        for (int k = 0; k < 4; ++k) {
            const auto it = kind.find(PixelCoord{p.x + dx[k], p.y + dy[k]});
            if (it == kind.end())
                throw Error("fog region: interior pixel with neighbor outside interior+boundary");
        }
}

namespace detail {

inline double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return {};
    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull.size() >= 3 ? hull : std::vector<Point>{};
}

inline bool strictly_inside_hull(const std::vector<Point>& hull, double x, double y) {
    const std::size_t n = hull.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % n];
        if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) <= 0.0) return false;
    }
    return true;
}

}  // namespace detail

// Omega = pixel centers strictly inside the convex hull of the
// face-outline landmark group, clipped so that every interior pixel
// keeps all four neighbors inside the image. A degenerate (collinear)
// outline yields an empty region.
inline FogRegion region_from_landmarks(const LandmarkSet& lm, int img_w, int img_h) {
    std::vector<Point> outline;
    for (int i : group_indices(FeatureGroup::FaceOutline)) outline.push_back(lm.points[i]);
    const std::vector<Point> hull = detail::convex_hull(outline);
    FogRegion region;
    if (hull.empty()) return region;

    double x0 = hull[0].x, x1 = x0, y0 = hull[0].y, y1 = y0;
    for (const Point& p : hull) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const int xa = std::max(1, static_cast<int>(std::floor(x0)));
    const int xb = std::min(img_w - 2, static_cast<int>(std::ceil(x1)));
    const int ya = std::max(1, static_cast<int>(std::floor(y0)));
    const int yb = std::min(img_h - 2, static_cast<int>(std::ceil(y1)));

    std::map<PixelCoord, bool> is_interior;
    for (int y = ya; y <= yb; ++y)
        for (int x = xa; x <= xb; ++x)
            if (detail::strictly_inside_hull(hull, x, y)) {
                region.interior.push_back(PixelCoord{x, y});
                is_interior.emplace(PixelCoord{x, y}, true);
            }

    std::map<PixelCoord, bool> on_boundary;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (const PixelCoord& p : region.interior)
        for (int k = 0; k < 4; ++k) {
            const PixelCoord q{p.x + dx[k], p.y + dy[k]};
            if (!is_interior.count(q) && on_boundary.emplace(q, true).second)
                region.boundary.push_back(q);
        }
    return region;
}

namespace detail {

struct MembraneSystem {
    std::vector<int> index;                 // grid -> unknown index, -1 outside Omega
    std::vector<std::array<int, 4>> nbrs;   // unknown -> neighbor unknown indices (-1 = boundary)
    std::vector<double> rhs;                // per-channel rhs filled by caller
};

inline double residual_inf(const MembraneSystem& sys, const std::vector<double>& x,
                           const std::vector<double>& rhs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double ax = 4.0 * x[i];
        for (int nb : sys.nbrs[i])
            if (nb >= 0) ax -= x[nb];
        worst = std::max(worst, std::abs(ax - rhs[i]));
    }
    return worst;
}

inline std::vector<double> apply_a(const MembraneSystem& sys, const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double ax = 4.0 * x[i];
        for (int nb : sys.nbrs[i])
            if (nb >= 0) ax -= x[nb];
        out[i] = ax;
    }
    return out;
}

}  // namespace detail

// Discrete membrane interpolation: for every interior pixel p,
// 4*f_p - sum of interior neighbors f_q equals the sum of Dirichlet
// boundary values read from the image. Pixels outside Omega are
// returned bit-identical; solved values are clamped to [0,1].
//
// Iterative methods run the residual below tolerance divided by a
// maximum-principle bound on ||A^-1||, so the solution error itself
// stays within the configured tolerance, not just the residual.
inline ImageBuffer solve_membrane(const ImageBuffer& img, const FogRegion& region,
                                  const MembraneSolveConfig& cfg) {
    if (!(cfg.tolerance > 0.0)) throw Error("solve_membrane: tolerance must be positive");
    if (cfg.max_iterations < 1) throw Error("solve_membrane: max_iterations must be >= 1");
    ImageBuffer out = img;
    if (region.empty()) return out;

    int bx0 = region.interior[0].x, bx1 = bx0, by0 = region.interior[0].y, by1 = by0;
    for (const PixelCoord& p : region.interior) {
        bx0 = std::min(bx0, p.x);
        bx1 = std::max(bx1, p.x);
        by0 = std::min(by0, p.y);
        by1 = std::max(by1, p.y);
    }
    // torsion-function bound for the 5-point Laplacian on the bounding box
    const double span = std::min(bx1 - bx0, by1 - by0) + 2.0;
    const double residual_target = cfg.tolerance / std::max(1.0, span * span / 8.0);

    const std::size_t n = region.interior.size();
    detail::MembraneSystem sys;
    sys.index.assign(img.plane_size(), -1);
    for (std::size_t i = 0; i < n; ++i) {
        const PixelCoord& p = region.interior[i];
        if (p.x <= 0 || p.y <= 0 || p.x >= img.width - 1 || p.y >= img.height - 1)
            throw Error("solve_membrane: region not valid for this image");
        sys.index[static_cast<std::size_t>(p.y) * img.width + p.x] = static_cast<int>(i);
    }
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    sys.nbrs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PixelCoord& p = region.interior[i];
        for (int k = 0; k < 4; ++k)
            sys.nbrs[i][k] =
                sys.index[static_cast<std::size_t>(p.y + dy[k]) * img.width + (p.x + dx[k])];
    }

    for (int c = 0; c < img.channels; ++c) {
        std::vector<double> rhs(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const PixelCoord& p = region.interior[i];
            for (int k = 0; k < 4; ++k)
                if (sys.nbrs[i][k] < 0) rhs[i] += img.at(p.x + dx[k], p.y + dy[k], c);
        }

        std::vector<double> x;
        switch (cfg.method) {
            case MembraneMethod::DirectDense: {
                std::vector<double> a(n * n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    a[i * n + i] = 4.0;
                    for (int nb : sys.nbrs[i])
                        if (nb >= 0) a[i * n + nb] -= 1.0;
                }
                x = solve_dense(std::move(a), rhs);
                break;
            }
            case MembraneMethod::GaussSeidel: {
                x.assign(n, 0.0);
                double res = detail::residual_inf(sys, x, rhs);
                int it = 0;
                while (res > residual_target) {
                    if (it++ >= cfg.max_iterations)
                        throw Error("solve_membrane: Gauss-Seidel did not converge in " +
                                    std::to_string(cfg.max_iterations) +
                                    " iterations (residual " + std::to_string(res) + ")");
                    for (std::size_t i = 0; i < n; ++i) {
                        double acc = rhs[i];
                        for (int nb : sys.nbrs[i])
                            if (nb >= 0) acc += x[nb];
                        x[i] = acc / 4.0;
                    }
                    res = detail::residual_inf(sys, x, rhs);
                }
                break;
            }
            case MembraneMethod::ConjugateGradient: {
                x.assign(n, 0.0);
                std::vector<double> r = rhs;  // r = b - A*0
                std::vector<double> p = r;
                double rr = 0.0;
                for (double v : r) rr += v * v;
                double res = detail::residual_inf(sys, x, rhs);
                int it = 0;
                while (res > residual_target) {
                    if (it++ >= cfg.max_iterations)
                        throw Error("solve_membrane: conjugate gradient did not converge in " +
                                    std::to_string(cfg.max_iterations) +
                                    " iterations (residual " + std::to_string(res) + ")");
                    const std::vector<double> ap = detail::apply_a(sys, p);
                    double pap = 0.0;
                    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
                    if (pap == 0.0) break;  // exact solution reached
                    const double alpha = rr / pap;
                    for (std::size_t i = 0; i < n; ++i) {
                        x[i] += alpha * p[i];
                        r[i] -= alpha * ap[i];
                    }
                    double rr_next = 0.0;
                    for (double v : r) rr_next += v * v;
                    const double beta = rr_next / rr;
                    rr = rr_next;
                    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
                    res = detail::residual_inf(sys, x, rhs);
                }
                break;
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const PixelCoord& p = region.interior[i];
            out.at(p.x, p.y, c) = clamp01(x[i]);
        }
    }
    return out;
}

// Membrane in-fill of the face region followed by a whole-image resize
// to the network input size. A degenerate region leaves the image
// untouched before the resize.
inline ImageBuffer foggy_face(const ImageBuffer& img, const FaceDetection& det,
                              const MembraneSolveConfig& cfg, int out) {
    const FogRegion region = region_from_landmarks(det.landmarks, img.width, img.height);
    const ImageBuffer filled = solve_membrane(img, region, cfg);
    return crop_resize(filled, filled.bounds(), out, out);
}

}  // namespace afif4
