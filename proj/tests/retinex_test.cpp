#include "afif4/retinex.hpp"

#include <gtest/gtest.h>

#include "support/test_util.hpp"

using namespace afif4;
using testutil::random_image;

namespace {

// direct O(n^2 k^2) convolution with replicate borders
ImageBuffer naive_convolve(const ImageBuffer& img, const GaussianSurround& s) {
    ImageBuffer out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int dy = -s.radius; dy <= s.radius; ++dy)
                    for (int dx = -s.radius; dx <= s.radius; ++dx)
                        acc += s.weight(dx, dy) * img.at_clamped(x - dx, y - dy, c);
                out.at(x, y, c) = acc;
            }
    return out;
}

}  // namespace

TEST(BuildSurround, WeightsSumToOne) {
    for (const auto& [g, radius] : std::vector<std::pair<double, int>>{
             {1.0, 2}, {1.0, 5}, {2.5, 5}, {7.0, 14}, {0.3, 1}}) {
        const GaussianSurround s = build_surround(g, radius);
        double sum = 0.0;
        for (double w : s.weights) {
            EXPECT_GT(w, 0.0);
            sum += w;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9) << "G=" << g << " radius=" << radius;
    }
}

TEST(BuildSurround, EightFoldSymmetry) {
    const GaussianSurround s = build_surround(1.7, 4);
    for (int dy = -s.radius; dy <= s.radius; ++dy)
        for (int dx = -s.radius; dx <= s.radius; ++dx) {
            EXPECT_DOUBLE_EQ(s.weight(dx, dy), s.weight(-dx, -dy));
            EXPECT_DOUBLE_EQ(s.weight(dx, dy), s.weight(dy, dx));
        }
}

TEST(BuildSurround, CenterWeightMatchesBruteForceNormalizer) {
    const GaussianSurround s = build_surround(1.0, 2);
    double z = 0.0;
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j) z += std::exp(-(i * i + j * j) / 1.0);
    EXPECT_NEAR(s.weight(0, 0), std::exp(0.0) / z, 1e-12);
}

TEST(BuildSurround, RejectsBadParameters) {
    EXPECT_THROW(build_surround(0.0, 3), Error);
    EXPECT_THROW(build_surround(-1.0, 3), Error);
    EXPECT_THROW(build_surround(2.0, 3), Error);  // radius below ceil(2G) = 4
    EXPECT_NO_THROW(build_surround(2.0, 4));
}

TEST(Convolve, ConstantImageIsFixedPoint) {
    const ImageBuffer img(12, 9, 3, 0.643);
    const ImageBuffer out = convolve(img, build_surround(1.5, 3));
    for (double v : out.pixels) EXPECT_NEAR(v, 0.643, 1e-12);
}

TEST(Convolve, SingleBrightPixelReproducesKernel) {
    const GaussianSurround s = build_surround(1.0, 2);
    ImageBuffer img(9, 9, 1, 0.0);
    img.at(4, 4, 0) = 1.0;
    const ImageBuffer out = convolve(img, s);
    // kernel fits fully around the center, so the response is the kernel
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            EXPECT_NEAR(out.at(4 + dx, 4 + dy, 0), s.weight(dx, dy), 1e-12);
    EXPECT_NEAR(out.at(0, 0, 0), 0.0, 1e-12);
    // full-image agreement with the direct oracle
    const ImageBuffer oracle = naive_convolve(img, s);
    EXPECT_LE(testutil::max_abs_diff(out, oracle), 1e-9);
}

TEST(Convolve, MatchesNaiveOracleOnRandomImage) {
    for (int channels : {1, 3}) {
        const ImageBuffer img = random_image(16, 16, channels, 1234 + channels);
        const GaussianSurround s = build_surround(2.0, 5);
        EXPECT_LE(testutil::max_abs_diff(convolve(img, s), naive_convolve(img, s)), 1e-9);
    }
}

TEST(SsrEnhance, ConstantImageMapsToHalf) {
    const ImageBuffer img(10, 8, 3, 0.77);
    const GaussianSurround s = build_surround(2.0, 4);
    // F * c = c up to kernel-normalization rounding, so the raw
    // response is a constant within fp noise and rescales to 0.5
    for (double r : ssr_raw(img, s, kDefaultSsrEps)) EXPECT_NEAR(r, 0.0, 1e-12);
    const ImageBuffer out = ssr_enhance(img, s, kDefaultSsrEps);
    for (double v : out.pixels) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(SsrRaw, InvariantUnderGlobalScaling) {
    // values bounded away from zero so the log guard stays negligible
    const ImageBuffer img = random_image(16, 16, 1, 5, 0.2, 1.0);
    ImageBuffer scaled = img;  // raw construction: deliberately above 1
    for (double& v : scaled.pixels) v *= 3.7;
    const GaussianSurround s = build_surround(2.0, 4);
    const auto a = ssr_raw(img, s, 1e-9);
    const auto b = ssr_raw(scaled, s, 1e-9);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(SsrRaw, MatchesScalarLoopOracle) {
    const ImageBuffer img = random_image(16, 16, 3, 6, 0.05, 1.0);
    const GaussianSurround s = build_surround(1.5, 3);
    const double eps = kDefaultSsrEps;
    const auto raw = ssr_raw(img, s, eps);
    const ImageBuffer blurred = naive_convolve(img, s);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const double expected =
                    std::log(img.at(x, y, c) + eps) - std::log(blurred.at(x, y, c) + eps);
                EXPECT_NEAR(raw[(c * 16 + y) * 16 + x], expected, 1e-9);
            }
}

TEST(SsrEnhance, OutputSpansUnitInterval) {
    const ImageBuffer img = random_image(20, 15, 1, 8);
    const ImageBuffer out = ssr_enhance(img, build_surround(3.0, 6), kDefaultSsrEps);
    double lo = 1.0, hi = 0.0;
    for (double v : out.pixels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
}

TEST(SsrEnhance, RejectsNonPositiveEps) {
    const ImageBuffer img(4, 4, 1, 0.5);
    EXPECT_THROW(ssr_enhance(img, build_surround(1.0, 2), 0.0), Error);
}
