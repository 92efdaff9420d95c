#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "afif4/facepatch.hpp"

namespace afif4 {

struct AugmentConfig {
    int shift = 5;  // translation in pixels; vacated bands take the original's mean
};

// out(x,y) = in(x-dx, y-dy) where defined, fill elsewhere.
inline ImageBuffer translate(const ImageBuffer& img, int dx, int dy,
                             const std::vector<double>& fill) {
    if (static_cast<int>(fill.size()) != img.channels)
        throw Error("translate: fill channel count mismatch");
    ImageBuffer out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const int sx = x - dx, sy = y - dy;
                out.at(x, y, c) = (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height)
                                      ? img.at(sx, sy, c)
                                      : clamp01(fill[c]);
            }
    return out;
}

// Ten training variants in fixed order: the original, its four
// one-direction translations (up, down, left, right), then the
// horizontal flips of those five. Vacated bands are filled with the
// per-channel mean of the original image.
inline std::vector<ImageBuffer> augment_10x(const ImageBuffer& img, const AugmentConfig& cfg) {
    if (cfg.shift < 1 || cfg.shift >= img.width || cfg.shift >= img.height)
        throw Error("augment_10x: shift " + std::to_string(cfg.shift) +
                    " invalid for a " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " image");
    const std::vector<double> fill = mean_intensity(img);
    std::vector<ImageBuffer> out;
    out.reserve(10);
    out.push_back(img);
    out.push_back(translate(img, 0, -cfg.shift, fill));  // up
    out.push_back(translate(img, 0, +cfg.shift, fill));  // down
    out.push_back(translate(img, -cfg.shift, 0, fill));  // left
    out.push_back(translate(img, +cfg.shift, 0, fill));  // right
    for (int i = 0; i < 5; ++i) out.push_back(horizontal_flip(out[i]));
    return out;
}

// ---- synthetic degradations ----

enum class DegradeKind { GaussianNoise, GaussianSmooth, Posterize, OccludeNose, OccludeMouth };
enum class Difficulty { Easy, Medium, Hard };

inline DegradeKind degrade_kind_from_name(const std::string& name) {
    if (name == "gaussian-noise") return DegradeKind::GaussianNoise;
    if (name == "gaussian-smooth") return DegradeKind::GaussianSmooth;
    if (name == "posterize") return DegradeKind::Posterize;
    if (name == "occlude-nose") return DegradeKind::OccludeNose;
    if (name == "occlude-mouth") return DegradeKind::OccludeMouth;
    throw Error("unknown degradation '" + name + "'");
}

inline Difficulty difficulty_from_name(const std::string& name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "medium") return Difficulty::Medium;
    if (name == "hard") return Difficulty::Hard;
    throw Error("unknown difficulty '" + name + "' (easy|medium|hard)");
}

struct DegradeSpec {
    DegradeKind kind = DegradeKind::GaussianNoise;
    double sigma = 0.0;       // gaussian-noise / gaussian-smooth
    int levels = 2;           // posterize
    double fill = 0.5;        // occlusions
    std::uint64_t seed = 0;   // gaussian-noise
};

inline constexpr double kOcclusionMargin = 1.2;

// Difficulty table. These values are not dictated anywhere; they are
// pinned here and the tests enforce that distortion grows easy ->
// medium -> hard for every kind.
inline DegradeSpec difficulty_params(DegradeKind kind, Difficulty difficulty) {
    DegradeSpec spec;
    spec.kind = kind;
    const int level = difficulty == Difficulty::Easy ? 0 : (difficulty == Difficulty::Medium ? 1 : 2);
    switch (kind) {
        case DegradeKind::GaussianNoise: {
            constexpr double sigmas[3] = {0.02, 0.05, 0.10};
            spec.sigma = sigmas[level];
            break;
        }
        case DegradeKind::GaussianSmooth: {
            constexpr double sigmas[3] = {1.0, 2.0, 4.0};
            spec.sigma = sigmas[level];
            break;
        }
        case DegradeKind::Posterize: {
            constexpr int levels[3] = {16, 8, 4};
            spec.levels = levels[level];
            break;
        }
        case DegradeKind::OccludeNose:
        case DegradeKind::OccludeMouth:
            // occlusion geometry does not vary with difficulty
            spec.fill = 0.5;
            break;
    }
    return spec;
}

namespace detail {

inline Rect expand_about_center(const Rect& box, double margin) {
    const double cx = box.x + box.w / 2.0, cy = box.y + box.h / 2.0;
    const double hx = box.w / 2.0 * margin, hy = box.h / 2.0 * margin;
    return Rect{cx - hx, cy - hy, 2.0 * hx, 2.0 * hy};
}

}  // namespace detail

inline ImageBuffer degrade(const ImageBuffer& img, const DegradeSpec& spec,
                           const std::optional<LandmarkSet>& landmarks = std::nullopt) {
    switch (spec.kind) {
        case DegradeKind::GaussianNoise: {
            if (spec.sigma < 0.0) throw Error("degrade: sigma must be >= 0");
            if (spec.sigma == 0.0) return img;
            ImageBuffer out = img;
            std::mt19937_64 rng(spec.seed);
            std::normal_distribution<double> noise(0.0, spec.sigma);
            for (double& v : out.pixels) v = clamp01(v + noise(rng));
            return out;
        }
        case DegradeKind::GaussianSmooth: {
            if (spec.sigma < 0.0) throw Error("degrade: sigma must be >= 0");
            if (spec.sigma == 0.0) return img;
            // std-dev sigma corresponds to surround scale sqrt(2)*sigma
            const double g = std::sqrt(2.0) * spec.sigma;
            const int radius = static_cast<int>(std::ceil(3.0 * spec.sigma));
            return convolve(img, build_surround(g, radius));
        }
        case DegradeKind::Posterize: {
            if (spec.levels < 2) throw Error("degrade: posterize levels must be >= 2");
            ImageBuffer out = img;
            const double steps = spec.levels - 1;
            for (double& v : out.pixels) v = std::round(v * steps) / steps;
            return out;
        }
        case DegradeKind::OccludeNose:
        case DegradeKind::OccludeMouth: {
            if (!landmarks) throw Error("degrade: occlusions require landmarks");
            const FeatureGroup group = spec.kind == DegradeKind::OccludeNose ? FeatureGroup::Nose
                                                                             : FeatureGroup::Mouth;
            const Rect box =
                detail::expand_about_center(landmarks->group_box(group), kOcclusionMargin);
            ImageBuffer out = img;
            detail::fill_rect(out, box, std::vector<double>(img.channels, spec.fill));
            return out;
        }
    }
    throw Error("degrade: unknown kind");
}

}  // namespace afif4
