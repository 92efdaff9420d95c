#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "afif4/config.hpp"
#include "afif4/datagen.hpp"
#include "afif4/fusion.hpp"
#include "afif4/membrane.hpp"
#include "afif4/net.hpp"
#include "afif4/report.hpp"

namespace afif4 {

// ---- fold and split planning ----

struct FoldPlan {
    int k = 5;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;            // per manifest record, -1 = discarded
    std::vector<std::size_t> discarded;  // record indices dropped for class balance
};

// Class-balanced k-fold plan: excess-class samples are discarded after
// a seeded shuffle, then each class is shuffled and dealt round-robin,
// so every fold holds the same number of males and females.
inline FoldPlan make_folds(const DatasetManifest& mf, int k, std::uint64_t seed) {
    if (k < 2) throw Error("make_folds: k must be >= 2");
    std::vector<std::size_t> males, females;
    for (std::size_t i = 0; i < mf.records.size(); ++i)
        (mf.records[i].gender == kMale ? males : females).push_back(i);
    if (males.size() < static_cast<std::size_t>(k) || females.size() < static_cast<std::size_t>(k))
        throw Error("make_folds: need at least k samples of each class (" +
                    std::to_string(males.size()) + " male, " + std::to_string(females.size()) +
                    " female, k=" + std::to_string(k) + ")");

    std::mt19937_64 rng(seed);
    const std::size_t keep = std::min(males.size(), females.size());
    std::vector<std::size_t>& excess = males.size() > females.size() ? males : females;
    std::shuffle(excess.begin(), excess.end(), rng);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.fold_of.assign(mf.records.size(), -1);
    plan.discarded.assign(excess.begin() + keep, excess.end());
    std::sort(plan.discarded.begin(), plan.discarded.end());
    excess.resize(keep);

    for (std::vector<std::size_t>* cls : {&males, &females}) {
        std::sort(cls->begin(), cls->end());
        std::shuffle(cls->begin(), cls->end(), rng);
        for (std::size_t i = 0; i < cls->size(); ++i)
            plan.fold_of[(*cls)[i]] = static_cast<int>(i % k);
    }
    return plan;
}

struct SplitPlan {
    std::uint64_t seed = 0;
    std::vector<std::size_t> cnn;       // 75% of the training set
    std::vector<std::size_t> adaboost;  // 60% of the remainder
    std::vector<std::size_t> fusion;    // the rest
};

// Seeded shuffle followed by the 75 / 15 / 10 partition. The CNN
// portion floors; the AdaBoost portion rounds 60%-of-the-rest to the
// nearest sample, which keeps every portion within one sample of its
// nominal fraction for all input sizes.
inline SplitPlan make_splits(std::vector<std::size_t> samples, std::uint64_t seed) {
    if (samples.size() < 8)
        throw Error("make_splits: need at least 8 samples, got " + std::to_string(samples.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const std::size_t n = samples.size();
    const std::size_t n_cnn = 3 * n / 4;                 // floor(0.75 n)
    const std::size_t n_ada = (6 * (n - n_cnn) + 5) / 10;  // round(0.6 of the rest)
    SplitPlan plan;
    plan.seed = seed;
    plan.cnn.assign(samples.begin(), samples.begin() + n_cnn);
    plan.adaboost.assign(samples.begin() + n_cnn, samples.begin() + n_cnn + n_ada);
    plan.fusion.assign(samples.begin() + n_cnn + n_ada, samples.end());
    return plan;
}

// ---- pipeline configuration ----

// Everything evaluation needs to reproduce training-time feature
// extraction; rides with the model bundle.
struct PipelineSettings {
    double patch_margin = kDefaultPatchMargin;
    double patch_min_box = kMinPatchBox;
    int patch_size = 32;  // network input side
    MembraneSolveConfig membrane;
    std::string detector_command;  // empty = manifest landmarks
};

struct PipelineConfig {
    std::string preset = "afif4-tiny";
    NetworkSpec net_spec = spec_afif4_tiny();
    TrainConfig train;
    PipelineSettings settings;
    int adaboost_rounds = kDefaultBoostRounds;
    double lda_shrinkage = kDefaultLdaShrinkage;
    AugmentConfig augment;
    std::uint64_t master_seed = 1;
    std::vector<std::pair<std::string, std::string>> echo;  // effective key=value pairs
};

inline PipelineConfig pipeline_config_from(const Config& cfg) {
    PipelineConfig pc;
    pc.master_seed = cfg.get_u64("seed", 1);
    pc.preset = cfg.get_string("preset", "afif4-tiny");
    pc.net_spec = spec_from_preset(pc.preset, cfg.get_int("channels", 1));
    pc.train.learning_rate = cfg.get_double("train.learning_rate", 0.01);
    pc.train.iterations = cfg.get_int("train.iterations", 1000);
    pc.train.batch_size = cfg.get_int("train.batch_size", 8);
    pc.train.init_scale = cfg.get_double("train.init_scale", 1.0);
    pc.settings.patch_margin = cfg.get_double("patch.margin", kDefaultPatchMargin);
    pc.settings.patch_min_box = cfg.get_double("patch.min_box", kMinPatchBox);
    const int patch_size = cfg.get_int("patch.size", 0);
    pc.settings.patch_size = patch_size > 0 ? patch_size : pc.net_spec.input_size;
    pc.settings.membrane.method =
        membrane_method_from_name(cfg.get_string("membrane.method", "cg"));
    pc.settings.membrane.tolerance = cfg.get_double("membrane.tolerance", 1e-6);
    pc.settings.membrane.max_iterations = cfg.get_int("membrane.max_iterations", 10000);
    pc.settings.detector_command = cfg.get_string("detector.command", "");
    pc.adaboost_rounds = cfg.get_int("adaboost.rounds", kDefaultBoostRounds);
    pc.lda_shrinkage = cfg.get_double("lda.shrinkage", kDefaultLdaShrinkage);
    pc.augment.shift = cfg.get_int("augment.shift", 5);
    for (const auto& [key, fallback] : config_defaults())
        pc.echo.emplace_back(key, cfg.get_string(key, fallback));
    return pc;
}

// ---- model bundle ----

struct ModelBundle {
    NetworkState face;  // scores the foggy whole-image feature
    NetworkState eye;   // shared by the left and right eye patches
    NetworkState nose;
    NetworkState mouth;
    FusionModel fusion;
    PipelineSettings settings;
    std::string preset;
    std::uint64_t master_seed = 0;
};

inline constexpr std::uint32_t kBundleFormatVersion = 1;

inline void save_bundle(const ModelBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_network(bundle.face, (fs::path(dir) / "face.afnn").string());
    save_network(bundle.eye, (fs::path(dir) / "eye.afnn").string());
    save_network(bundle.nose, (fs::path(dir) / "nose.afnn").string());
    save_network(bundle.mouth, (fs::path(dir) / "mouth.afnn").string());
    save_fusion(bundle.fusion, (fs::path(dir) / "fusion.affu").string());
    nlohmann::json j;
    j["bundle_format"] = kBundleFormatVersion;
    j["network_format"] = kNetworkFormatVersion;
    j["fusion_format"] = kFusionFormatVersion;
    j["preset"] = bundle.preset;
    j["master_seed"] = bundle.master_seed;
    j["settings"] = {{"patch_margin", bundle.settings.patch_margin},
                     {"patch_min_box", bundle.settings.patch_min_box},
                     {"patch_size", bundle.settings.patch_size},
                     {"membrane_method",
                      bundle.settings.membrane.method == MembraneMethod::DirectDense  ? "dense"
                      : bundle.settings.membrane.method == MembraneMethod::GaussSeidel ? "gs"
                                                                                       : "cg"},
                     {"membrane_tolerance", bundle.settings.membrane.tolerance},
                     {"membrane_max_iterations", bundle.settings.membrane.max_iterations},
                     {"detector_command", bundle.settings.detector_command}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw Error("cannot write bundle manifest in " + dir);
    out << j.dump(2) << "\n";
    if (!out) throw Error("short write: bundle manifest in " + dir);
}

inline ModelBundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    std::ifstream in(base / "manifest.json");
    if (!in) throw Error("cannot open bundle manifest in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(dir + ": bad bundle manifest: " + e.what());
    }
    if (j.value("bundle_format", 0u) != kBundleFormatVersion)
        throw Error(dir + ": unsupported bundle format version");
    ModelBundle bundle;
    bundle.preset = j.value("preset", std::string());
    bundle.master_seed = j.value("master_seed", std::uint64_t{0});
    const auto& s = j.at("settings");
    bundle.settings.patch_margin = s.value("patch_margin", kDefaultPatchMargin);
    bundle.settings.patch_min_box = s.value("patch_min_box", kMinPatchBox);
    bundle.settings.patch_size = s.value("patch_size", 32);
    bundle.settings.membrane.method =
        membrane_method_from_name(s.value("membrane_method", std::string("cg")));
    bundle.settings.membrane.tolerance = s.value("membrane_tolerance", 1e-6);
    bundle.settings.membrane.max_iterations = s.value("membrane_max_iterations", 10000);
    bundle.settings.detector_command = s.value("detector_command", std::string());
    bundle.face = load_network((base / "face.afnn").string());
    bundle.eye = load_network((base / "eye.afnn").string());
    bundle.nose = load_network((base / "nose.afnn").string());
    bundle.mouth = load_network((base / "mouth.afnn").string());
    bundle.fusion = load_fusion((base / "fusion.affu").string());
    return bundle;
}

// ---- pipeline stages ----

namespace detail {

struct ExtractedFeatures {
    ImageBuffer foggy;
    ImageBuffer eye_left;
    ImageBuffer eye_right;
    ImageBuffer nose;
    ImageBuffer mouth;
};

inline FaceDetection detection_for(const SampleRecord& rec, const ImageBuffer& img,
                                   const PipelineSettings& settings) {
    if (rec.landmarks) return detection_from_landmarks(*rec.landmarks);
    if (!settings.detector_command.empty()) {
        const auto det = command_detector(settings.detector_command)(img);
        if (!det) throw Error("no face detected in sample '" + rec.image_path + "'");
        return *det;
    }
    throw Error("sample '" + rec.image_path +
                "' has no landmarks and no detector is configured");
}

inline ExtractedFeatures extract_features(const ImageBuffer& img, const FaceDetection& det,
                                          const PipelineSettings& settings) {
    ExtractedFeatures f;
    f.foggy = foggy_face(img, det, settings.membrane, settings.patch_size);
    const PatchSet ps = extract_patch_set(img, det, settings.patch_margin, settings.patch_size,
                                          settings.patch_min_box);
    f.eye_left = ps.eye_left;
    f.eye_right = ps.eye_right;
    f.nose = ps.nose;
    f.mouth = ps.mouth;
    return f;
}

inline ExtractedFeatures extract_record(const DatasetManifest& mf, std::size_t idx,
                                        const PipelineSettings& settings, const char* stage) {
    const SampleRecord& rec = mf.records[idx];
    try {
        const ImageBuffer img = load_image(rec.image_path);
        const FaceDetection det = detection_for(rec, img, settings);
        return extract_features(img, det, settings);
    } catch (const Error& e) {
        throw Error(std::string(stage) + " stage, sample '" + rec.image_path + "': " + e.what());
    }
}

}  // namespace detail

// Five feature scores of one sample under a trained bundle.
inline ScoreSet bundle_scores(const ModelBundle& bundle, const ImageBuffer& img,
                              const FaceDetection& det) {
    const detail::ExtractedFeatures f = detail::extract_features(img, det, bundle.settings);
    ScoreSet scores;
    const auto push = [&scores](FeatureLabel label, std::pair<int, double> cs) {
        scores.push_back(FeatureScore{label, cs.first, cs.second});
    };
    push(FeatureLabel::Face, predict_score(bundle.face, f.foggy));
    push(FeatureLabel::EyeLeft, predict_score(bundle.eye, f.eye_left));
    push(FeatureLabel::EyeRight, predict_score(bundle.eye, f.eye_right));
    push(FeatureLabel::Nose, predict_score(bundle.nose, f.nose));
    push(FeatureLabel::Mouth, predict_score(bundle.mouth, f.mouth));
    return scores;
}

inline int predict_bundle(const ModelBundle& bundle, const ImageBuffer& img,
                          const FaceDetection& det) {
    return predict_fusion(bundle.fusion, bundle_scores(bundle, img, det));
}

// Trains the full pipeline on the given manifest records: internal
// 75/15/10 split, patch + foggy extraction, 10x augmentation of the
// CNN portion, four networks (foggy face, shared eye, nose, mouth),
// then 15 AdaBoost ensembles and the final discriminant. Deterministic
// for a fixed master seed; per-feature seeds are fixed offsets from it.
inline ModelBundle train_on_samples(const DatasetManifest& mf,
                                    const std::vector<std::size_t>& sample_indices,
                                    const PipelineConfig& cfg, std::uint64_t split_seed) {
    const SplitPlan split = make_splits(sample_indices, split_seed);

    ModelBundle bundle;
    bundle.settings = cfg.settings;
    bundle.preset = cfg.preset;
    bundle.master_seed = cfg.master_seed;

    // feature extraction on the CNN portion
    std::vector<detail::ExtractedFeatures> cnn_features;
    std::vector<int> cnn_labels;
    cnn_features.reserve(split.cnn.size());
    for (std::size_t idx : split.cnn) {
        cnn_features.push_back(detail::extract_record(mf, idx, cfg.settings, "cnn-extract"));
        cnn_labels.push_back(mf.records[idx].gender);
    }

    // per-feature network training over the augmented patch sets
    const auto train_feature = [&](std::uint64_t seed_offset,
                                   const std::vector<const ImageBuffer*>& patches,
                                   const std::vector<int>& labels) {
        std::vector<std::pair<ImageBuffer, int>> samples;
        samples.reserve(patches.size() * 10);
        for (std::size_t i = 0; i < patches.size(); ++i)
            for (ImageBuffer& aug : augment_10x(*patches[i], cfg.augment))
                samples.emplace_back(std::move(aug), labels[i]);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.master_seed + seed_offset;
        return train(init_network(cfg.net_spec, cfg.master_seed + seed_offset, cfg.train.init_scale),
                     samples, tc);
    };

    {
        std::vector<const ImageBuffer*> p;
        for (const auto& f : cnn_features) p.push_back(&f.foggy);
        bundle.face = train_feature(1, p, cnn_labels);
    }
    {
        std::vector<const ImageBuffer*> p;
        std::vector<int> labels;
        for (std::size_t i = 0; i < cnn_features.size(); ++i) {
            p.push_back(&cnn_features[i].eye_left);
            labels.push_back(cnn_labels[i]);
            p.push_back(&cnn_features[i].eye_right);
            labels.push_back(cnn_labels[i]);
        }
        bundle.eye = train_feature(2, p, labels);
    }
    {
        std::vector<const ImageBuffer*> p;
        for (const auto& f : cnn_features) p.push_back(&f.nose);
        bundle.nose = train_feature(3, p, cnn_labels);
    }
    {
        std::vector<const ImageBuffer*> p;
        for (const auto& f : cnn_features) p.push_back(&f.mouth);
        bundle.mouth = train_feature(4, p, cnn_labels);
    }
    cnn_features.clear();

    const auto score_portion = [&](const std::vector<std::size_t>& indices, const char* stage,
                                   std::vector<ScoreSet>& score_sets, std::vector<int>& labels) {
        for (std::size_t idx : indices) {
            const SampleRecord& rec = mf.records[idx];
            try {
                const ImageBuffer img = load_image(rec.image_path);
                const FaceDetection det = detail::detection_for(rec, img, cfg.settings);
                score_sets.push_back(bundle_scores(bundle, img, det));
            } catch (const Error& e) {
                throw Error(std::string(stage) + " stage, sample '" + rec.image_path +
                            "': " + e.what());
            }
            labels.push_back(rec.gender);
        }
    };

    // AdaBoost portion: one ensemble per score combination
    bundle.fusion.locals = local_feature_labels();
    bundle.fusion.combos = enumerate_combinations(bundle.fusion.locals);
    {
        std::vector<ScoreSet> score_sets;
        std::vector<int> labels;
        score_portion(split.adaboost, "adaboost-score", score_sets, labels);
        for (const ScoreCombination& combo : bundle.fusion.combos) {
            std::vector<std::vector<double>> vectors;
            vectors.reserve(score_sets.size());
            for (const ScoreSet& s : score_sets) vectors.push_back(combination_vector(combo, s));
            try {
                bundle.fusion.ensembles.push_back(
                    train_adaboost(vectors, labels, cfg.adaboost_rounds));
            } catch (const Error& e) {
                throw Error("adaboost-train stage, combination " + std::to_string(combo.index) +
                            ": " + e.what());
            }
        }
    }

    // fusion portion: final discriminant over the ensemble decisions
    {
        std::vector<ScoreSet> score_sets;
        std::vector<int> labels;
        score_portion(split.fusion, "fusion-score", score_sets, labels);
        std::vector<std::vector<double>> decisions;
        decisions.reserve(score_sets.size());
        for (const ScoreSet& s : score_sets)
            decisions.push_back(ensemble_decisions(bundle.fusion, s));
        try {
            bundle.fusion.discriminant = train_lda(decisions, labels, cfg.lda_shrinkage);
        } catch (const Error& e) {
            throw Error(std::string("fusion-train stage: ") + e.what());
        }
    }
    return bundle;
}

inline ModelBundle run_training(const DatasetManifest& mf, const FoldPlan& plan, int fold_id,
                                const PipelineConfig& cfg) {
    if (fold_id < 0 || fold_id >= plan.k) throw Error("run_training: invalid fold id");
    if (plan.fold_of.size() != mf.records.size())
        throw Error("run_training: fold plan does not match the manifest");
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < mf.records.size(); ++i)
        if (plan.fold_of[i] >= 0 && plan.fold_of[i] != fold_id) train_idx.push_back(i);
    return train_on_samples(mf, train_idx, cfg, cfg.master_seed + 100 + fold_id);
}

inline double evaluate_on_samples(const ModelBundle& bundle, const DatasetManifest& mf,
                                  const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw Error("evaluate: no samples");
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const SampleRecord& rec = mf.records[idx];
        try {
            const ImageBuffer img = load_image(rec.image_path);
            const FaceDetection det = detail::detection_for(rec, img, bundle.settings);
            if (predict_bundle(bundle, img, det) == rec.gender) ++correct;
        } catch (const Error& e) {
            throw Error("evaluate stage, sample '" + rec.image_path + "': " + e.what());
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
}

// Accuracy (%) of the bundle over the test fold.
inline double run_evaluation(const ModelBundle& bundle, const DatasetManifest& mf,
                             const FoldPlan& plan, int fold_id) {
    if (fold_id < 0 || fold_id >= plan.k) throw Error("run_evaluation: invalid fold id");
    if (plan.fold_of.size() != mf.records.size())
        throw Error("run_evaluation: fold plan does not match the manifest");
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < mf.records.size(); ++i)
        if (plan.fold_of[i] == fold_id) test_idx.push_back(i);
    return evaluate_on_samples(bundle, mf, test_idx);
}

// Trains on the whole training manifest (internally split 75/15/10)
// and evaluates on every record of the test manifest.
inline double run_cross_dataset(const DatasetManifest& train_mf, const DatasetManifest& test_mf,
                                const PipelineConfig& cfg) {
    std::vector<std::size_t> all_train(train_mf.records.size());
    for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = i;
    const ModelBundle bundle = train_on_samples(train_mf, all_train, cfg, cfg.master_seed + 100);
    std::vector<std::size_t> all_test(test_mf.records.size());
    for (std::size_t i = 0; i < all_test.size(); ++i) all_test[i] = i;
    return evaluate_on_samples(bundle, test_mf, all_test);
}

// Full k-fold cross-validation: one training + evaluation per fold.
inline RunReport run_crossval(const DatasetManifest& mf, int k, const PipelineConfig& cfg) {
    const FoldPlan plan = make_folds(mf, k, cfg.master_seed + 10);
    RunReport report;
    report.dataset = mf.name;
    report.master_seed = cfg.master_seed;
    report.config_echo = cfg.echo;
    for (int fold = 0; fold < k; ++fold) {
        const ModelBundle bundle = run_training(mf, plan, fold, cfg);
        report.fold_accuracy_pct.push_back(run_evaluation(bundle, mf, plan, fold));
    }
    finalize_report_mean(report);
    return report;
}

// Resolves relative record paths against a base directory (typically
// the manifest's own directory).
inline void resolve_manifest_paths(DatasetManifest& mf, const std::string& base_dir) {
    namespace fs = std::filesystem;
    for (SampleRecord& rec : mf.records) {
        const fs::path p(rec.image_path);
        if (p.is_relative()) rec.image_path = (fs::path(base_dir) / p).string();
    }
}

}  // namespace afif4
