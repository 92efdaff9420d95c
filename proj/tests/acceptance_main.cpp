// Acceptance suite: every release criterion as a hard pass/fail check
// at its stated tolerance. Run with no arguments for the full sweep or
// name a single criterion.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "afif4/afif4.hpp"
#include "support/synthetic_faces.hpp"
#include "support/test_util.hpp"

using namespace afif4;

namespace {

int g_failures = 0;
std::string g_current;

#define REQUIRE(cond, msg)                                                             \
    do {                                                                               \
        if (!(cond)) {                                                                 \
            std::cerr << "[FAIL] " << g_current << ": " << msg << " (" << __FILE__    \
                      << ":" << __LINE__ << ")\n";                                    \
            ++g_failures;                                                              \
            return;                                                                    \
        }                                                                              \
    } while (0)

ImageBuffer random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0,
                         double hi = 1.0) {
    return testutil::random_image(w, h, c, seed, lo, hi);
}

// ---- criterion: table1-consistency ----
// F-measure recomputed from the recall/precision pairs of the two SSR
// detection rows, within +/-0.05 percentage points.
void check_table1() {
    const auto sof = detection_metrics(DetectionCounts{7161, 539, 589});
    REQUIRE(std::abs(sof.recall_pct - 92.40) < 1e-9, "SoF recall should be 92.40");
    REQUIRE(std::abs(sof.precision_pct - 93.00) < 1e-9, "SoF precision should be 93.00");
    REQUIRE(std::abs(sof.f_measure_pct - 92.70) <= 0.05,
            "SoF F-measure " << sof.f_measure_pct << " not within 0.05 of 92.70");

    const auto fddb =
        detection_metrics(DetectionCounts{7799LL * 9707LL, 7799LL * 293LL, 2201LL * 9707LL});
    REQUIRE(std::abs(fddb.recall_pct - 77.99) < 1e-9, "FDDB recall should be 77.99");
    REQUIRE(std::abs(fddb.precision_pct - 97.07) < 1e-9, "FDDB precision should be 97.07");
    REQUIRE(std::abs(fddb.f_measure_pct - 86.49) <= 0.05,
            "FDDB F-measure " << fddb.f_measure_pct << " not within 0.05 of 86.49");
}

// ---- criterion: combination-count ----
void check_combinations() {
    const auto combos = enumerate_combinations(local_feature_labels());
    REQUIRE(combos.size() == 15, "expected 15 combinations, got " << combos.size());
    const ScoreSet scores = {FeatureScore{FeatureLabel::Face, +1, 0.91},
                             FeatureScore{FeatureLabel::EyeLeft, -1, 0.6},
                             FeatureScore{FeatureLabel::EyeRight, +1, 0.7},
                             FeatureScore{FeatureLabel::Nose, -1, 0.8},
                             FeatureScore{FeatureLabel::Mouth, +1, 0.55}};
    for (const auto& c : combos) {
        const auto v = combination_vector(c, scores);
        REQUIRE(v.size() == c.subset.size() + 1, "vector length mismatch");
        REQUIRE(v[0] == 0.91, "face score must lead every combination vector");
    }
    // brute-force subset oracle for n <= 10
    for (int n = 1; n <= 10; ++n) {
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) labels[i] = i;
        const auto generic = enumerate_combinations(labels);
        std::set<std::set<int>> oracle;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            std::set<int> subset;
            for (int j = 0; j < n; ++j)
                if (mask & (1u << j)) subset.insert(j);
            oracle.insert(subset);
        }
        REQUIRE(generic.size() == oracle.size(),
                "n=" << n << ": expected " << oracle.size() << " combinations");
        std::set<std::set<int>> produced;
        for (const auto& c : generic)
            produced.insert(std::set<int>(c.subset.begin(), c.subset.end()));
        REQUIRE(produced == oracle, "n=" << n << ": subset mismatch against the oracle");
    }
}

// ---- criterion: poisson-membrane ----
FogRegion rect_region(int x0, int y0, int x1, int y1) {
    FogRegion r;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) r.interior.push_back(PixelCoord{x, y});
    std::set<PixelCoord> interior(r.interior.begin(), r.interior.end());
    std::set<PixelCoord> boundary;
    for (const PixelCoord& p : r.interior)
        for (const auto& [dx, dy] :
             std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const PixelCoord q{p.x + dx, p.y + dy};
            if (!interior.count(q)) boundary.insert(q);
        }
    r.boundary.assign(boundary.begin(), boundary.end());
    return r;
}

void check_membrane() {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 2 + static_cast<int>(rng() % 11);  // interior up to 12x12
        const int h = 2 + static_cast<int>(rng() % 11);
        const ImageBuffer img = random_image(w + 6, h + 6, 1, 7000 + trial);
        const FogRegion region = rect_region(3, 3, 3 + w - 1, 3 + h - 1);

        MembraneSolveConfig dense_cfg;
        dense_cfg.method = MembraneMethod::DirectDense;
        const ImageBuffer dense = solve_membrane(img, region, dense_cfg);

        MembraneSolveConfig iter_cfg;  // conjugate gradient, tolerance 1e-6
        iter_cfg.max_iterations = 100000;
        const ImageBuffer solved = solve_membrane(img, region, iter_cfg);
        REQUIRE(testutil::max_abs_diff(dense, solved) <= 1e-6,
                "trial " << trial << ": iterative vs dense exceeded 1e-6");

        double lo = 1.0, hi = 0.0;
        for (const PixelCoord& p : region.boundary) {
            lo = std::min(lo, img.at(p.x, p.y, 0));
            hi = std::max(hi, img.at(p.x, p.y, 0));
        }
        for (const PixelCoord& p : region.interior) {
            REQUIRE(solved.at(p.x, p.y, 0) >= lo - iter_cfg.tolerance,
                    "trial " << trial << ": maximum principle violated (low side)");
            REQUIRE(solved.at(p.x, p.y, 0) <= hi + iter_cfg.tolerance,
                    "trial " << trial << ": maximum principle violated (high side)");
        }
    }

    // constant boundary
    const FogRegion region = rect_region(3, 3, 9, 9);
    MembraneSolveConfig cfg;
    const ImageBuffer constant(14, 14, 1, 0.375);
    const ImageBuffer filled = solve_membrane(constant, region, cfg);
    for (const PixelCoord& p : region.interior)
        REQUIRE(std::abs(filled.at(p.x, p.y, 0) - 0.375) <= cfg.tolerance,
                "constant boundary not reproduced");

    // affine ramp
    ImageBuffer ramp(14, 14, 1);
    for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 14; ++x) ramp.at(x, y, 0) = 0.02 * x + 0.03 * y + 0.05;
    const ImageBuffer ramp_filled = solve_membrane(ramp, region, cfg);
    for (const PixelCoord& p : region.interior)
        REQUIRE(std::abs(ramp_filled.at(p.x, p.y, 0) - (0.02 * p.x + 0.03 * p.y + 0.05)) <= 1e-6,
                "affine ramp not harmonic within tolerance");
}

// ---- criterion: ssr-properties ----
void check_ssr() {
    const GaussianSurround s = build_surround(2.0, 4);

    const ImageBuffer constant(16, 16, 3, 0.81);
    const ImageBuffer enhanced = ssr_enhance(constant, s, kDefaultSsrEps);
    for (double v : enhanced.pixels)
        REQUIRE(v == 0.5, "constant image must map to constant 0.5, got " << v);

    const ImageBuffer img = random_image(16, 16, 1, 42, 0.2, 1.0);
    ImageBuffer scaled = img;
    for (double& v : scaled.pixels) v *= 2.9;  // deliberately unclamped
    const auto raw_a = ssr_raw(img, s, 1e-9);
    const auto raw_b = ssr_raw(scaled, s, 1e-9);
    for (std::size_t i = 0; i < raw_a.size(); ++i)
        REQUIRE(std::abs(raw_a[i] - raw_b[i]) <= 1e-6,
                "raw response not invariant under global scaling at pixel " << i);

    const ImageBuffer probe = random_image(16, 16, 3, 43);
    const ImageBuffer fast = convolve(probe, s);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                double acc = 0.0;
                for (int dy = -s.radius; dy <= s.radius; ++dy)
                    for (int dx = -s.radius; dx <= s.radius; ++dx)
                        acc += s.weight(dx, dy) * probe.at_clamped(x - dx, y - dy, c);
                REQUIRE(std::abs(fast.at(x, y, c) - acc) <= 1e-9,
                        "convolution deviates from the direct oracle at (" << x << "," << y << ")");
            }
}

// ---- criterion: gradient-checks ----
void check_gradients() {
    // eps at the small end of the allowed range: the finite-difference
    // window must stay clear of relu kinks, and double precision keeps
    // the roundoff term negligible at 1e-6
    const NetworkSpec tiny = spec_afif4_tiny(1);
    const double tiny_err = gradient_check(tiny, random_image(32, 32, 1, 500), kMale, 1e-6);
    REQUIRE(tiny_err < 1e-3, "tiny preset gradient error " << tiny_err << " >= 1e-3");

    NetworkSpec fc;
    fc.name = "fc-only";
    fc.input_size = 8;
    fc.input_channels = 1;
    fc.layers = {LayerSpec::fc(16), LayerSpec::relu(), LayerSpec::fc(2), LayerSpec::softmax()};
    const double fc_err = gradient_check(fc, random_image(8, 8, 1, 501), kFemale, 1e-5);
    REQUIRE(fc_err < 1e-5, "fully-connected gradient error " << fc_err << " >= 1e-5");
}

// ---- criterion: learnability ----
void check_learnability() {
    std::vector<std::pair<ImageBuffer, int>> samples;
    for (int i = 0; i < 64; ++i) {
        ImageBuffer img(32, 32, 1, 0.0);
        const bool horizontal = i % 2 == 0;
        const int pos = 2 + (i / 2) % 28;
        for (int t = 0; t < 32; ++t) {
            if (horizontal) img.at(t, pos, 0) = 1.0;
            else img.at(pos, t, 0) = 1.0;
        }
        samples.emplace_back(std::move(img), horizontal ? kMale : kFemale);
    }
    TrainConfig cfg;
    cfg.iterations = 1000;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 8;
    cfg.seed = 6;
    const NetworkState net = train(init_network(spec_afif4_tiny(1), 7), samples, cfg);
    int correct = 0;
    for (const auto& [img, label] : samples)
        if (predict_score(net, img).first == label) ++correct;
    const double acc = 100.0 * correct / samples.size();
    REQUIRE(acc > 95.0, "bar-orientation training accuracy " << acc << "% <= 95%");
}

// ---- criterion: adaboost ----
void check_adaboost() {
    const double alpha = alpha_from_error(0.25);
    REQUIRE(std::abs(alpha - 0.5 * std::log(3.0)) <= 1e-12,
            "alpha(0.25) = " << alpha << " deviates from ln(3)/2");

    // separable 1-D scores: zero training error
    std::vector<std::vector<double>> sep;
    std::vector<int> sep_labels;
    for (int i = 0; i < 12; ++i) {
        sep.push_back({i < 6 ? -0.8 + 0.02 * i : 0.55 + 0.02 * i});
        sep_labels.push_back(i < 6 ? -1 : +1);
    }
    const BoostEnsemble sep_ens = train_adaboost(sep, sep_labels, 5);
    for (std::size_t i = 0; i < sep.size(); ++i)
        REQUIRE(predict_adaboost(sep_ens, sep[i]) == sep_labels[i],
                "separable scores misclassified at sample " << i);

    // empirical training-error bound on 20 random datasets:
    // err <= prod_t 2 sqrt(eps_t (1 - eps_t)) = prod_t sech(alpha_t)
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 40 + rng() % 60;
        const std::size_t dim = 1 + rng() % 5;
        std::vector<std::vector<double>> vectors(n, std::vector<double>(dim));
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) vectors[i][j] = uni(rng);
            labels[i] = (uni(rng) + 0.5 * vectors[i][0]) > 0.0 ? +1 : -1;
        }
        bool mixed = false;
        for (std::size_t i = 1; i < n; ++i) mixed = mixed || labels[i] != labels[0];
        if (!mixed) labels[0] = -labels[0];

        const BoostEnsemble ens = train_adaboost(vectors, labels, 15);
        double bound = 1.0;
        for (double a : ens.alphas) bound *= 1.0 / std::cosh(a);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (predict_adaboost(ens, vectors[i]) != labels[i]) ++wrong;
        const double err = static_cast<double>(wrong) / n;
        REQUIRE(err <= bound + 1e-12,
                "trial " << trial << ": error " << err << " above bound " << bound);
    }
}

// ---- criterion: augmentation ----
void check_augmentation() {
    const ImageBuffer img = random_image(20, 18, 3, 900);
    const int shift = 5;
    const auto out = augment_10x(img, AugmentConfig{shift});
    REQUIRE(out.size() == 10, "expected 10 outputs, got " << out.size());
    REQUIRE(out[0].pixels == img.pixels, "output 0 must be the original");
    for (int i = 0; i < 5; ++i)
        REQUIRE(out[5 + i].pixels == horizontal_flip(out[i]).pixels,
                "output " << 5 + i << " must be the flip of output " << i);
    const auto mean = mean_intensity(img);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < shift; ++x)
                REQUIRE(out[4].at(x, y, c) == mean[c],
                        "right translation: vacated band must hold the original mean");
        for (int y = 0; y < shift; ++y)
            for (int x = 0; x < img.width; ++x)
                REQUIRE(out[2].at(x, y, c) == mean[c],
                        "down translation: vacated band must hold the original mean");
    }
}

// ---- criterion: fold-split-protocol ----
void check_folds_splits() {
    std::mt19937_64 rng(31337);
    // split fractions on sizes 8 .. 10,000
    for (const std::size_t n : {8u, 9u, 23u, 100u, 1537u, 10000u}) {
        std::vector<std::size_t> samples(n);
        for (std::size_t i = 0; i < n; ++i) samples[i] = i;
        const SplitPlan plan = make_splits(samples, rng());
        std::set<std::size_t> seen;
        for (const auto* part : {&plan.cnn, &plan.adaboost, &plan.fusion})
            for (std::size_t s : *part)
                REQUIRE(seen.insert(s).second, "n=" << n << ": portions overlap");
        REQUIRE(seen.size() == n, "n=" << n << ": portions do not cover the input");
        REQUIRE(std::abs(static_cast<double>(plan.cnn.size()) - 0.75 * n) <= 1.0,
                "n=" << n << ": cnn portion " << plan.cnn.size() << " off 75%");
        REQUIRE(std::abs(static_cast<double>(plan.adaboost.size()) - 0.15 * n) <= 1.0,
                "n=" << n << ": adaboost portion " << plan.adaboost.size() << " off 15%");
        REQUIRE(std::abs(static_cast<double>(plan.fusion.size()) - 0.10 * n) <= 1.0,
                "n=" << n << ": fusion portion " << plan.fusion.size() << " off 10%");
    }
    // fold balance and disjointness on randomized manifests
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 6);
        const int males = k + static_cast<int>(rng() % 2000);
        const int females = k + static_cast<int>(rng() % 2000);
        DatasetManifest mf;
        for (int i = 0; i < males + females; ++i) {
            SampleRecord r;
            r.image_path = "p" + std::to_string(i);
            r.gender = i < males ? kMale : kFemale;
            mf.records.push_back(std::move(r));
        }
        const FoldPlan plan = make_folds(mf, k, rng());
        const int keep = std::min(males, females);
        REQUIRE(static_cast<int>(plan.discarded.size()) == std::abs(males - females),
                "trial " << trial << ": wrong discard count");
        for (std::size_t idx : plan.discarded)
            REQUIRE(mf.records[idx].gender == (males > females ? kMale : kFemale),
                    "trial " << trial << ": discarded from the minority class");
        std::map<int, std::pair<int, int>> per_fold;
        int assigned = 0;
        for (std::size_t i = 0; i < mf.records.size(); ++i) {
            const int f = plan.fold_of[i];
            if (f < 0) continue;
            REQUIRE(f < k, "trial " << trial << ": fold id out of range");
            ++assigned;
            if (mf.records[i].gender == kMale) ++per_fold[f].first;
            else ++per_fold[f].second;
        }
        REQUIRE(assigned == 2 * keep, "trial " << trial << ": retained count mismatch");
        for (const auto& [fold, counts] : per_fold)
            REQUIRE(counts.first == counts.second,
                    "trial " << trial << ": fold " << fold << " unbalanced ("
                             << counts.first << " male, " << counts.second << " female)");
    }
}

// ---- criterion: end-to-end-synthetic ----
void check_end_to_end() {
    const std::string dir = testutil::scratch_dir("accept_e2e");
    testutil::SyntheticOptions opt;
    opt.count = 400;
    opt.image_size = 64;
    opt.seed = 24601;
    const DatasetManifest mf = testutil::generate_synthetic_dataset(dir, opt);

    PipelineConfig cfg;
    cfg.master_seed = 13;
    cfg.net_spec = spec_afif4_tiny(1);
    cfg.train.iterations = 1000;
    cfg.train.learning_rate = 0.02;
    cfg.train.batch_size = 8;
    cfg.settings.patch_size = 32;

    const int k = 5;
    const FoldPlan plan = make_folds(mf, k, cfg.master_seed + 10);
    double total = 0.0;
    std::vector<std::string> bundle_dirs;
    for (int fold = 0; fold < k; ++fold) {
        const ModelBundle bundle = run_training(mf, plan, fold, cfg);
        const double acc = run_evaluation(bundle, mf, plan, fold);
        std::cout << "  fold " << fold << ": " << acc << "%\n";
        total += acc;
        const std::string bdir = testutil::scratch_dir("accept_bundle");
        save_bundle(bundle, bdir);
        bundle_dirs.push_back(bdir);
    }
    const double mean = total / k;
    std::cout << "  mean accuracy: " << mean << "%\n";
    REQUIRE(mean >= 90.0, "mean accuracy " << mean << "% below 90%");

    // byte-determinism: repeat the full run under the same master seed
    for (int fold = 0; fold < k; ++fold) {
        const ModelBundle again = run_training(mf, plan, fold, cfg);
        const std::string bdir = testutil::scratch_dir("accept_bundle_2");
        save_bundle(again, bdir);
        for (const char* name : {"face.afnn", "eye.afnn", "nose.afnn", "mouth.afnn",
                                 "fusion.affu", "manifest.json"}) {
            std::ifstream a(bundle_dirs[fold] + "/" + name, std::ios::binary);
            std::ifstream b(bdir + "/" + name, std::ios::binary);
            std::ostringstream sa, sb;
            sa << a.rdbuf();
            sb << b.rdbuf();
            REQUIRE(!sa.str().empty(), "fold " << fold << ": empty bundle file " << name);
            REQUIRE(sa.str() == sb.str(),
                    "fold " << fold << ": bundle file " << name << " not byte-identical");
        }
    }
}

struct Criterion {
    const char* name;
    void (*run)();
    double budget_s;  // hard runtime budget
};

const Criterion kCriteria[] = {
    {"table1-consistency", check_table1, 1.0},
    {"combination-count", check_combinations, 1.0},
    {"poisson-membrane", check_membrane, 10.0},
    {"ssr-properties", check_ssr, 5.0},
    {"gradient-checks", check_gradients, 30.0},
    {"learnability", check_learnability, 120.0},
    {"adaboost", check_adaboost, 10.0},
    {"augmentation", check_augmentation, 1.0},
    {"fold-split-protocol", check_folds_splits, 5.0},
    {"end-to-end-synthetic", check_end_to_end, 600.0},
};

}  // namespace

int main(int argc, char** argv) {
    const std::string only = argc > 1 ? argv[1] : "";
    bool matched = false;
    for (const Criterion& c : kCriteria) {
        if (!only.empty() && only != c.name) continue;
        matched = true;
        g_current = c.name;
        const int before = g_failures;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run();
        } catch (const std::exception& e) {
            std::cerr << "[FAIL] " << c.name << ": unexpected exception: " << e.what() << "\n";
            ++g_failures;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (g_failures == before && secs > c.budget_s) {
            std::cerr << "[FAIL] " << c.name << ": runtime " << secs << " s exceeds the "
                      << c.budget_s << " s budget\n";
            ++g_failures;
        }
        if (g_failures == before)
            std::cout << "[PASS] " << c.name << " (" << secs << " s, budget " << c.budget_s
                      << " s)\n";
    }
    if (!matched) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    return g_failures == 0 ? 0 : 1;
}
