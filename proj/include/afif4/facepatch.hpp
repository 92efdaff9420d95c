#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include "afif4/landmarks.hpp"
#include "afif4/manifest.hpp"
#include "afif4/retinex.hpp"

namespace afif4 {

struct FaceDetection {
    LandmarkSet landmarks;
    Rect face_rect;  // contains all 17 landmark points
    double fit_score = 0.0;
};

// Pluggable face detector: best face in the image, or nothing. Must be
// deterministic for a fixed input image.
using DetectorPort = std::function<std::optional<FaceDetection>(const ImageBuffer&)>;

struct PatchSet {
    ImageBuffer eye_left;
    ImageBuffer eye_right;
    ImageBuffer nose;
    ImageBuffer mouth;
    FaceDetection source;
};

inline constexpr double kDefaultPatchMargin = 1.5;
inline constexpr double kMinPatchBox = 8.0;  // degenerate landmark groups get at least 8x8

// Detection built straight from known landmarks; the face rect is the
// bounding box of all 17 points.
inline FaceDetection detection_from_landmarks(const LandmarkSet& lm, double fit_score = 1.0) {
    FaceDetection det;
    det.landmarks = lm;
    det.face_rect = lm.bounding_box();
    det.fit_score = fit_score;
    return det;
}

namespace detail {

inline void fill_rect(ImageBuffer& img, const Rect& r, const std::vector<double>& fill) {
    const int x0 = std::max(0, static_cast<int>(std::floor(r.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(r.y)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(r.x + r.w)) - 1);
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(r.y + r.h)) - 1);
    for (int c = 0; c < img.channels; ++c)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) img.at(x, y, c) = clamp01(fill[c]);
}

}  // namespace detail

// Multi-face sweep: run the detector, mask the detected face rect with
// a single-color rectangle on a working copy, and repeat until the
// detector fires no more or max_faces is reached. If the very first
// attempt on the original fails, retry once on the SSR-enhanced image;
// when that fires, the sweep continues on the enhanced copy (geometry
// is shared, the enhancement does not move pixels).
inline std::vector<FaceDetection> detect_all_faces(const ImageBuffer& img,
                                                   const DetectorPort& detector,
                                                   const std::vector<double>& mask_fill,
                                                   int max_faces) {
    if (max_faces < 1) throw Error("detect_all_faces: max_faces must be >= 1");
    if (static_cast<int>(mask_fill.size()) != img.channels)
        throw Error("detect_all_faces: mask_fill channel count mismatch");

    std::vector<FaceDetection> found;
    ImageBuffer working = img;
    bool first_attempt = true;
    while (static_cast<int>(found.size()) < max_faces) {
        std::optional<FaceDetection> det = detector(working);
        if (!det && first_attempt) {
            ImageBuffer enhanced = ssr_enhance(working);
            det = detector(enhanced);
            if (det) working = std::move(enhanced);
        }
        first_attempt = false;
        if (!det) break;
        found.push_back(*det);
        detail::fill_rect(working, det->face_rect, mask_fill);
    }
    return found;
}

inline std::vector<FaceDetection> detect_all_faces(const ImageBuffer& img,
                                                   const DetectorPort& detector, int max_faces) {
    return detect_all_faces(img, detector, mean_intensity(img), max_faces);
}

// Bounding box of a landmark group expanded about its center by
// `margin`; half-extents never drop below min_box/2 so degenerate
// groups still produce a usable crop window.
inline Rect patch_rect(const LandmarkSet& lm, FeatureGroup group, double margin,
                       double min_box = kMinPatchBox) {
    if (margin < 1.0) throw Error("patch_rect: margin must be >= 1");
    const Rect box = lm.group_box(group);
    const double cx = box.x + box.w / 2.0;
    const double cy = box.y + box.h / 2.0;
    const double hx = std::max(box.w / 2.0 * margin, min_box / 2.0);
    const double hy = std::max(box.h / 2.0 * margin, min_box / 2.0);
    return Rect{cx - hx, cy - hy, 2.0 * hx, 2.0 * hy};
}

inline ImageBuffer extract_patch(const ImageBuffer& img, const LandmarkSet& lm, FeatureGroup group,
                                 double margin, int out, double min_box = kMinPatchBox) {
    if (group == FeatureGroup::FaceOutline)
        throw Error("extract_patch: group must be one of left-eye, right-eye, nose, mouth");
    // patch_rect is in pixel-center coordinates; crop_resize rects are
    // cell-edge based, so shift by half a pixel to keep the crop
    // centered on the landmarks (and mirror symmetry exact)
    const Rect r = patch_rect(lm, group, margin, min_box);
    return crop_resize(img, Rect{r.x + 0.5, r.y + 0.5, r.w, r.h}, out, out);
}

inline PatchSet extract_patch_set(const ImageBuffer& img, const FaceDetection& det, double margin,
                                  int out, double min_box = kMinPatchBox) {
    PatchSet ps;
    ps.eye_left = extract_patch(img, det.landmarks, FeatureGroup::LeftEye, margin, out, min_box);
    ps.eye_right = extract_patch(img, det.landmarks, FeatureGroup::RightEye, margin, out, min_box);
    ps.nose = extract_patch(img, det.landmarks, FeatureGroup::Nose, margin, out, min_box);
    ps.mouth = extract_patch(img, det.landmarks, FeatureGroup::Mouth, margin, out, min_box);
    ps.source = det;
    return ps;
}

// ---- external detector plug-in wire format ----
// One line per image: fit-score, face rect (x y w h), then 34 landmark
// coordinates, space-separated. An empty line means no face.

inline std::string format_detection_record(const FaceDetection& det) {
    std::ostringstream out;
    out.precision(17);
    out << det.fit_score << ' ' << det.face_rect.x << ' ' << det.face_rect.y << ' '
        << det.face_rect.w << ' ' << det.face_rect.h;
    for (const Point& p : det.landmarks.points) out << ' ' << p.x << ' ' << p.y;
    return out.str();
}

inline std::optional<FaceDetection> parse_detection_record(const std::string& line) {
    std::istringstream in(line);
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (values.empty()) {
        std::string leftover;
        if (in.clear(), in >> leftover)
            throw Error("detection record: non-numeric token '" + leftover + "'");
        return std::nullopt;  // empty line: no face
    }
    const std::size_t expected = 5 + 2 * kLandmarkCount;
    if (values.size() != expected)
        throw Error("detection record: expected " + std::to_string(expected) + " numbers, got " +
                    std::to_string(values.size()));
    FaceDetection det;
    det.fit_score = values[0];
    det.face_rect = Rect{values[1], values[2], values[3], values[4]};
    for (int i = 0; i < kLandmarkCount; ++i) {
        det.landmarks.points[i].x = values[5 + 2 * i];
        det.landmarks.points[i].y = values[6 + 2 * i];
    }
    return det;
}

// Adapter for an external detector executable. The image is written to
// a temporary PGM/PPM file and the command is run as `cmd <path>`; its
// first output line must follow the record format above.
inline DetectorPort command_detector(const std::string& command) {
    return [command](const ImageBuffer& img) -> std::optional<FaceDetection> {
        namespace fs = std::filesystem;
        static int counter = 0;
        const fs::path tmp = fs::temp_directory_path() /
                             ("afif4_detect_" + std::to_string(++counter) +
                              (img.channels == 1 ? ".pgm" : ".ppm"));
        save_image(img, tmp.string());
        const std::string full = command + " " + tmp.string();
        FILE* pipe = ::popen(full.c_str(), "r");
        if (!pipe) {
            fs::remove(tmp);
            throw Error("command_detector: cannot run '" + full + "'");
        }
        std::string line;
        int ch;
        while ((ch = std::fgetc(pipe)) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
        const int status = ::pclose(pipe);
        fs::remove(tmp);
        if (status != 0) throw Error("command_detector: '" + command + "' exited with status " +
                                     std::to_string(status));
        return parse_detection_record(line);
    };
}

}  // namespace afif4
