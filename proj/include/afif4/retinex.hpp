#pragma once

#include <cmath>
#include <vector>

#include "afif4/image.hpp"

namespace afif4 {

inline constexpr double kDefaultSsrEps = 1.0 / 255.0;

// Unit-sum Gaussian surround kernel: weights[i,j] proportional to
// exp(-(i^2+j^2)/G^2) on the square [-radius, radius]^2, normalized so
// the discrete sum is 1. The kernel is separable; `row` keeps the
// unnormalized 1-D factor so convolution can run as two passes.
struct GaussianSurround {
    double contrast_scale = 0.0;  // G
    int radius = 0;
    std::vector<double> weights;  // (2*radius+1)^2, normalized
    std::vector<double> row;      // 2*radius+1, unnormalized factor
    double row_outer_sum = 0.0;   // sum of all row[i]*row[j] products

    int side() const { return 2 * radius + 1; }
    double weight(int dx, int dy) const {
        return weights[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
    }
};

inline GaussianSurround build_surround(double g, int radius) {
    if (!(g > 0.0)) throw Error("build_surround: G must be positive");
    const int min_radius = static_cast<int>(std::ceil(2.0 * g));
    if (radius < min_radius)
        throw Error("build_surround: radius " + std::to_string(radius) + " below minimum " +
                    std::to_string(min_radius) + " for G=" + std::to_string(g));

    GaussianSurround s;
    s.contrast_scale = g;
    s.radius = radius;
    s.row.resize(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        s.row[i + radius] = std::exp(-static_cast<double>(i) * i / (g * g));

    const int side = s.side();
    s.weights.resize(static_cast<std::size_t>(side) * side);
    double total = 0.0;
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i) {
            const double v = s.row[j] * s.row[i];
            s.weights[static_cast<std::size_t>(j) * side + i] = v;
            total += v;
        }
    s.row_outer_sum = total;
    for (double& w : s.weights) w /= total;
    return s;
}

inline GaussianSurround build_surround(double g) {
    return build_surround(g, static_cast<int>(std::ceil(2.0 * g)));
}

// Default surround contrast for an image when none is configured.
inline double default_surround_scale(const ImageBuffer& img) {
    return std::max(img.width, img.height) / 4.0;
}

namespace detail {

// Separable convolution with replicate borders, no range clamping.
// Equivalent to the direct 2-D sum because border clamping factors
// per axis.
inline std::vector<double> convolve_raw(const ImageBuffer& img, const GaussianSurround& s) {
    const int w = img.width, h = img.height, r = s.radius;
    std::vector<double> tmp(img.pixels.size());
    std::vector<double> out(img.pixels.size());
    for (int c = 0; c < img.channels; ++c) {
        const std::size_t base = c * img.plane_size();
        // horizontal pass
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int xs = std::clamp(x - i, 0, w - 1);
                    acc += s.row[i + r] * img.pixels[base + static_cast<std::size_t>(y) * w + xs];
                }
                tmp[base + static_cast<std::size_t>(y) * w + x] = acc;
            }
        // vertical pass + normalization
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int j = -r; j <= r; ++j) {
                    const int ys = std::clamp(y - j, 0, h - 1);
                    acc += s.row[j + r] * tmp[base + static_cast<std::size_t>(ys) * w + x];
                }
                out[base + static_cast<std::size_t>(y) * w + x] = acc / s.row_outer_sum;
            }
    }
    return out;
}

}  // namespace detail

// 2-D convolution with the surround kernel, replicate-border padding.
inline ImageBuffer convolve(const ImageBuffer& img, const GaussianSurround& s) {
    ImageBuffer out(img.width, img.height, img.channels);
    out.pixels = detail::convolve_raw(img, s);
    for (double& v : out.pixels) v = clamp01(v);
    return out;
}

// Raw retinex response log(I+eps) - log(F*I+eps), per pixel per
// channel. Values are unbounded; same plane layout as the input.
inline std::vector<double> ssr_raw(const ImageBuffer& img, const GaussianSurround& s, double eps) {
    if (!(eps > 0.0)) throw Error("ssr_raw: eps must be positive");
    std::vector<double> blurred = detail::convolve_raw(img, s);
    std::vector<double> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(img.pixels[i] + eps) - std::log(blurred[i] + eps);
    return out;
}

// Raw response rescaled affinely per image to [0,1] (min -> 0,
// max -> 1); an all-equal response maps to constant 0.5.
inline ImageBuffer ssr_enhance(const ImageBuffer& img, const GaussianSurround& s,
                               double eps = kDefaultSsrEps) {
    const std::vector<double> raw = ssr_raw(img, s, eps);
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ImageBuffer out(img.width, img.height, img.channels);
    if (hi == lo) {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.5);
        return out;
    }
    const double scale = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < raw.size(); ++i) out.pixels[i] = clamp01((raw[i] - lo) * scale);
    return out;
}

inline ImageBuffer ssr_enhance(const ImageBuffer& img, double eps = kDefaultSsrEps) {
    return ssr_enhance(img, build_surround(default_surround_scale(img)), eps);
}

}  // namespace afif4
