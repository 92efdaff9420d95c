#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "afif4/image.hpp"

namespace afif4::testutil {

inline ImageBuffer random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0) {
    ImageBuffer img(w, h, c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo, hi);
    for (double& v : img.pixels) v = uni(rng);
    return img;
}

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        worst = std::max(worst, std::abs(a.pixels[i] - b.pixels[i]));
    return worst;
}

// Fresh scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("afif4_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(++counter));
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace afif4::testutil
