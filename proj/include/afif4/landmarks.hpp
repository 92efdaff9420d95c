#pragma once

#include <array>
#include <span>
#include <string>

#include "afif4/image.hpp"

namespace afif4 {

inline constexpr int kLandmarkCount = 17;

enum class FeatureGroup { LeftEye, RightEye, Nose, Mouth, FaceOutline };

inline const char* group_name(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::LeftEye: return "left-eye";
        case FeatureGroup::RightEye: return "right-eye";
        case FeatureGroup::Nose: return "nose";
        case FeatureGroup::Mouth: return "mouth";
        case FeatureGroup::FaceOutline: return "face-outline";
    }
    return "?";
}

// Fixed index convention over the 17 points: 0-2 left eye, 3-5 right
// eye, 6-8 nose, 9-12 mouth, 13-16 face outline. Detectors providing
// richer point sets must map down to this layout.
inline std::span<const int> group_indices(FeatureGroup g) {
    static constexpr std::array<int, kLandmarkCount> all = {0, 1, 2, 3, 4, 5, 6, 7, 8,
                                                            9, 10, 11, 12, 13, 14, 15, 16};
    switch (g) {
        case FeatureGroup::LeftEye: return {all.data() + 0, 3};
        case FeatureGroup::RightEye: return {all.data() + 3, 3};
        case FeatureGroup::Nose: return {all.data() + 6, 3};
        case FeatureGroup::Mouth: return {all.data() + 9, 4};
        case FeatureGroup::FaceOutline: return {all.data() + 13, 4};
    }
    return {};
}

struct LandmarkSet {
    std::array<Point, kLandmarkCount> points{};

    // True when every point lies inside a w x h image.
    bool within_bounds(int w, int h) const {
        for (const Point& p : points)
            if (p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 || p.y > h - 1.0) return false;
        return true;
    }

    // Tight axis-aligned bounding box of one landmark group.
    Rect group_box(FeatureGroup g) const {
        const auto idx = group_indices(g);
        double x0 = points[idx[0]].x, x1 = x0, y0 = points[idx[0]].y, y1 = y0;
        for (int i : idx) {
            x0 = std::min(x0, points[i].x);
            x1 = std::max(x1, points[i].x);
            y0 = std::min(y0, points[i].y);
            y1 = std::max(y1, points[i].y);
        }
        return Rect{x0, y0, x1 - x0, y1 - y0};
    }

    // Bounding box of all 17 points.
    Rect bounding_box() const {
        double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
        for (const Point& p : points) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        return Rect{x0, y0, x1 - x0, y1 - y0};
    }
};

}  // namespace afif4
