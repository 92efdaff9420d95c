#pragma once

// Procedural two-class "face" dataset for end-to-end pipeline runs.
// Class +1 images carry horizontal stripe texture, class -1 vertical,
// both across the background and inside every feature region, so each
// of the five feature scores is informative. Landmarks follow a
// canonical layout with per-sample jitter.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "afif4/manifest.hpp"

namespace afif4::testutil {

struct SyntheticOptions {
    int count = 400;
    int image_size = 64;
    std::uint64_t seed = 9090;
    double noise = 0.04;
    bool invert_labels = false;  // swap the label attached to each pattern class
    std::string name = "synthetic";
};

inline LandmarkSet canonical_landmarks(double scale) {
    const double base[kLandmarkCount][2] = {
        {20, 24}, {24, 22}, {28, 24},            // left eye
        {36, 24}, {40, 22}, {44, 24},            // right eye
        {30, 32}, {32, 36}, {34, 32},            // nose
        {24, 44}, {32, 42}, {40, 44}, {32, 46},  // mouth
        {14, 12}, {50, 12}, {50, 54}, {14, 54},  // face outline
    };
    LandmarkSet lm;
    for (int i = 0; i < kLandmarkCount; ++i)
        lm.points[i] = Point{base[i][0] * scale, base[i][1] * scale};
    return lm;
}

inline DatasetManifest generate_synthetic_dataset(const std::string& dir,
                                                  const SyntheticOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    DatasetManifest mf;
    mf.name = opt.name;
    const int size = opt.image_size;
    const double scale = size / 64.0;
    for (int i = 0; i < opt.count; ++i) {
        std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        const int pattern = i % 2 == 0 ? kMale : kFemale;  // pattern class, balanced

        const double phase = uni(rng) * 3.14159265358979;
        const double period = (5.0 + uni(rng)) * scale;
        const double offset_x = 3.0 * scale * uni(rng);
        const double offset_y = 3.0 * scale * uni(rng);
        std::normal_distribution<double> noise(0.0, opt.noise);

        ImageBuffer img(size, size, 1);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double t = pattern == kMale ? (y - offset_y) : (x - offset_x);
                const double stripe = 0.5 + 0.35 * std::sin(2.0 * 3.14159265358979 * t / period +
                                                            phase);
                img.at(x, y, 0) = clamp01(stripe + noise(rng));
            }

        LandmarkSet lm = canonical_landmarks(scale);
        for (Point& p : lm.points) {
            p.x = std::clamp(p.x + offset_x + uni(rng) * scale, 0.0, size - 1.0);
            p.y = std::clamp(p.y + offset_y + uni(rng) * scale, 0.0, size - 1.0);
        }

        SampleRecord rec;
        rec.image_path = (fs::path(dir) / ("face_" + std::to_string(i) + ".pgm")).string();
        rec.gender = opt.invert_labels ? -pattern : pattern;
        rec.subject_id = "s" + std::to_string(i);
        rec.landmarks = lm;
        save_image(img, rec.image_path);
        mf.records.push_back(std::move(rec));
    }
    write_manifest(mf, (fs::path(dir) / "manifest.tsv").string());
    return mf;
}

}  // namespace afif4::testutil
