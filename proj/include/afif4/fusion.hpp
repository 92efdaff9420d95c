#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "afif4/binio.hpp"
#include "afif4/linalg.hpp"

namespace afif4 {

enum class FeatureLabel : std::uint32_t { Face = 0, EyeLeft = 1, EyeRight = 2, Nose = 3, Mouth = 4 };

inline const char* feature_label_name(FeatureLabel l) {
    switch (l) {
        case FeatureLabel::Face: return "face";
        case FeatureLabel::EyeLeft: return "eye-left";
        case FeatureLabel::EyeRight: return "eye-right";
        case FeatureLabel::Nose: return "nose";
        case FeatureLabel::Mouth: return "mouth";
    }
    return "?";
}

// Canonical order of the local features; combination subsets and
// vector layouts follow it.
inline const std::vector<FeatureLabel>& local_feature_labels() {
    static const std::vector<FeatureLabel> labels = {FeatureLabel::EyeLeft, FeatureLabel::EyeRight,
                                                     FeatureLabel::Nose, FeatureLabel::Mouth};
    return labels;
}

// Signed score S = c * s: the winning softmax probability carrying the
// predicted class as its sign.
inline double signed_score(int cls, double softmax_score) {
    if (cls != +1 && cls != -1) throw Error("signed_score: class must be +1 or -1");
    if (!(softmax_score >= 0.5 && softmax_score <= 1.0))
        throw Error("signed_score: softmax score must lie in [0.5, 1]");
    return cls * softmax_score;
}

struct FeatureScore {
    FeatureLabel label = FeatureLabel::Face;
    int cls = +1;          // predicted class
    double score = 0.5;    // winning softmax probability in [0.5, 1]

    double signed_value() const { return signed_score(cls, score); }
};

// One per-sample score bundle: exactly the five labels, any order.
using ScoreSet = std::vector<FeatureScore>;

namespace detail {

// face score plus the four locals in canonical order
inline std::array<double, 5> canonical_signed(const ScoreSet& scores) {
    std::array<double, 5> out{};
    std::array<bool, 5> seen{};
    for (const FeatureScore& s : scores) {
        const auto idx = static_cast<std::size_t>(s.label);
        if (idx > 4) throw Error("score set: unknown feature label");
        if (seen[idx])
            throw Error(std::string("score set: duplicate label ") + feature_label_name(s.label));
        seen[idx] = true;
        out[idx] = s.signed_value();
    }
    for (std::size_t i = 0; i < 5; ++i)
        if (!seen[i])
            throw Error(std::string("score set: missing label ") +
                        feature_label_name(static_cast<FeatureLabel>(i)));
    return out;
}

}  // namespace detail

// A non-empty subset of the local labels, paired with the face score:
// vector layout is always S_face first, then the subset scores in
// canonical order.
template <typename Label>
struct Combination {
    int index = 0;  // 1-based position in the canonical enumeration
    std::vector<Label> subset;

    int vector_length() const { return 1 + static_cast<int>(subset.size()); }
};

using ScoreCombination = Combination<FeatureLabel>;

// All 2^n - 1 combinations, enumerated by binary counting over the
// canonical label order (bit j of the index selects labels[j]).
template <typename Label>
std::vector<Combination<Label>> enumerate_combinations(const std::vector<Label>& locals) {
    const std::size_t n = locals.size();
    if (n == 0) throw Error("enumerate_combinations: empty label set");
    if (n > 16) throw Error("enumerate_combinations: more than 16 labels");
    std::vector<Combination<Label>> combos;
    combos.reserve((1u << n) - 1);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        Combination<Label> c;
        c.index = static_cast<int>(mask);
        for (std::size_t j = 0; j < n; ++j)
            if (mask & (1u << j)) c.subset.push_back(locals[j]);
        combos.push_back(std::move(c));
    }
    return combos;
}

// Combination vector for one sample: <S_face, subset...>.
inline std::vector<double> combination_vector(const ScoreCombination& combo,
                                              const ScoreSet& scores) {
    const auto canon = detail::canonical_signed(scores);
    std::vector<double> v;
    v.reserve(combo.vector_length());
    v.push_back(canon[static_cast<std::size_t>(FeatureLabel::Face)]);
    for (FeatureLabel l : combo.subset) v.push_back(canon[static_cast<std::size_t>(l)]);
    return v;
}

// ---- AdaBoost over decision stumps ----

struct DecisionStump {
    int component = 0;
    double threshold = 0.0;
    int polarity = +1;

    int predict(const std::vector<double>& v) const {
        return v[component] > threshold ? polarity : -polarity;
    }
};

struct BoostEnsemble {
    int vector_length = 0;
    std::vector<DecisionStump> stumps;
    std::vector<double> alphas;
};

inline constexpr double kAdaBoostErrorClamp = 1e-10;

// alpha_t = 0.5 * ln((1 - eps) / eps), with eps clamped away from the
// endpoints so separable rounds stay finite.
inline double alpha_from_error(double eps) {
    eps = std::clamp(eps, kAdaBoostErrorClamp, 1.0 - kAdaBoostErrorClamp);
    return 0.5 * std::log((1.0 - eps) / eps);
}

// Discrete AdaBoost, T rounds. Candidate stumps sit at midpoints
// between consecutive distinct component values; ties in the weighted
// error resolve to the lowest component index, then the lowest
// threshold, then polarity +1. When every component is constant (no
// midpoints anywhere) a single constant stump below the minimum keeps
// training total.
inline BoostEnsemble train_adaboost(const std::vector<std::vector<double>>& vectors,
                                    const std::vector<int>& labels, int rounds) {
    if (vectors.empty()) throw Error("train_adaboost: no samples");
    if (vectors.size() != labels.size()) throw Error("train_adaboost: vector/label count mismatch");
    if (rounds < 1) throw Error("train_adaboost: rounds must be >= 1");
    const std::size_t n = vectors.size();
    const std::size_t dim = vectors[0].size();
    if (dim == 0) throw Error("train_adaboost: empty vectors");
    for (const auto& v : vectors)
        if (v.size() != dim) throw Error("train_adaboost: non-uniform vector length");
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == +1) has_pos = true;
        else if (y == -1) has_neg = true;
        else throw Error("train_adaboost: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw Error("train_adaboost: both classes must be present");

    // candidate thresholds per component
    std::vector<std::vector<double>> candidates(dim);
    bool any = false;
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> vals(n);
        for (std::size_t i = 0; i < n; ++i) vals[i] = vectors[i][j];
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i)
            candidates[j].push_back(0.5 * (vals[i] + vals[i + 1]));
        any = any || !candidates[j].empty();
    }
    if (!any) candidates[0].push_back(vectors[0][0] - 1.0);

    BoostEnsemble ens;
    ens.vector_length = static_cast<int>(dim);
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    for (int t = 0; t < rounds; ++t) {
        DecisionStump best;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < dim; ++j)
            for (double theta : candidates[j])
                for (int polarity : {+1, -1}) {
                    DecisionStump stump{static_cast<int>(j), theta, polarity};
                    double err = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        if (stump.predict(vectors[i]) != labels[i]) err += weights[i];
                    if (err < best_err) {
                        best_err = err;
                        best = stump;
                    }
                }
        const double alpha = alpha_from_error(best_err);
        ens.stumps.push_back(best);
        ens.alphas.push_back(alpha);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] *= std::exp(-alpha * labels[i] * best.predict(vectors[i]));
            total += weights[i];
        }
        for (double& w : weights) w /= total;
    }
    return ens;
}

// sign of the alpha-weighted stump vote; an exact zero maps to +1.
inline int predict_adaboost(const BoostEnsemble& ens, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != ens.vector_length)
        throw Error("predict_adaboost: vector length " + std::to_string(v.size()) +
                    " does not match ensemble length " + std::to_string(ens.vector_length));
    double sum = 0.0;
    for (std::size_t t = 0; t < ens.stumps.size(); ++t)
        sum += ens.alphas[t] * ens.stumps[t].predict(v);
    return sum >= 0.0 ? +1 : -1;
}

// ---- linear discriminant final stage ----

struct LinearDiscriminant {
    std::vector<double> weights;
    double bias = 0.0;
    double shrinkage = 0.0;
};

// Two-class Fisher discriminant with the pooled covariance shrunk
// toward the identity: Sigma_l = (1-l)*Sigma + l*I. The decision
// threshold sits at the midpoint of the projected class means.
inline LinearDiscriminant train_lda(const std::vector<std::vector<double>>& vectors,
                                    const std::vector<int>& labels, double shrinkage) {
    if (vectors.empty()) throw Error("train_lda: no samples");
    if (vectors.size() != labels.size()) throw Error("train_lda: vector/label count mismatch");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw Error("train_lda: shrinkage must be in [0,1]");
    const std::size_t n = vectors.size();
    const std::size_t dim = vectors[0].size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw Error("train_lda: non-uniform vector length");

    std::vector<double> mean_pos(dim, 0.0), mean_neg(dim, 0.0);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == +1) {
            ++n_pos;
            for (std::size_t j = 0; j < dim; ++j) mean_pos[j] += vectors[i][j];
        } else if (labels[i] == -1) {
            ++n_neg;
            for (std::size_t j = 0; j < dim; ++j) mean_neg[j] += vectors[i][j];
        } else {
            throw Error("train_lda: labels must be +1 or -1");
        }
    }
    if (n_pos == 0 || n_neg == 0) throw Error("train_lda: both classes must be present");
    for (std::size_t j = 0; j < dim; ++j) {
        mean_pos[j] /= static_cast<double>(n_pos);
        mean_neg[j] /= static_cast<double>(n_neg);
    }

    std::vector<double> cov(dim * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double>& mu = labels[i] == +1 ? mean_pos : mean_neg;
        for (std::size_t a = 0; a < dim; ++a) {
            const double da = vectors[i][a] - mu[a];
            for (std::size_t b = 0; b < dim; ++b) cov[a * dim + b] += da * (vectors[i][b] - mu[b]);
        }
    }
    if (n > 2)
        for (double& v : cov) v /= static_cast<double>(n - 2);
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b) {
            cov[a * dim + b] *= (1.0 - shrinkage);
            if (a == b) cov[a * dim + b] += shrinkage;
        }

    std::vector<double> diff(dim);
    for (std::size_t j = 0; j < dim; ++j) diff[j] = mean_pos[j] - mean_neg[j];
    LinearDiscriminant ld;
    ld.shrinkage = shrinkage;
    ld.weights = solve_dense(std::move(cov), diff);
    double mid = 0.0;
    for (std::size_t j = 0; j < dim; ++j) mid += ld.weights[j] * 0.5 * (mean_pos[j] + mean_neg[j]);
    ld.bias = -mid;
    return ld;
}

inline int predict_lda(const LinearDiscriminant& ld, const std::vector<double>& v) {
    if (v.size() != ld.weights.size()) throw Error("predict_lda: vector length mismatch");
    double s = ld.bias;
    for (std::size_t j = 0; j < v.size(); ++j) s += ld.weights[j] * v[j];
    return s >= 0.0 ? +1 : -1;
}

// ---- full fusion stage ----

struct FusionModel {
    std::vector<FeatureLabel> locals;         // canonical local label order
    std::vector<ScoreCombination> combos;     // 2^n - 1, index-aligned with ensembles
    std::vector<BoostEnsemble> ensembles;
    LinearDiscriminant discriminant;
};

inline constexpr int kDefaultBoostRounds = 50;
inline constexpr double kDefaultLdaShrinkage = 0.1;

// Per-sample decisions of all ensembles, the vector the discriminant
// consumes.
inline std::vector<double> ensemble_decisions(const FusionModel& model, const ScoreSet& scores) {
    std::vector<double> y;
    y.reserve(model.ensembles.size());
    for (std::size_t i = 0; i < model.ensembles.size(); ++i)
        y.push_back(static_cast<double>(
            predict_adaboost(model.ensembles[i], combination_vector(model.combos[i], scores))));
    return y;
}

inline FusionModel train_fusion(const std::vector<ScoreSet>& score_sets,
                                const std::vector<int>& labels, int rounds = kDefaultBoostRounds,
                                double shrinkage = kDefaultLdaShrinkage) {
    if (score_sets.size() != labels.size()) throw Error("train_fusion: score/label count mismatch");
    if (score_sets.empty()) throw Error("train_fusion: no samples");
    FusionModel model;
    model.locals = local_feature_labels();
    model.combos = enumerate_combinations(model.locals);
    for (const ScoreCombination& combo : model.combos) {
        std::vector<std::vector<double>> vectors;
        vectors.reserve(score_sets.size());
        for (const ScoreSet& s : score_sets) vectors.push_back(combination_vector(combo, s));
        model.ensembles.push_back(train_adaboost(vectors, labels, rounds));
    }
    std::vector<std::vector<double>> decisions;
    decisions.reserve(score_sets.size());
    for (const ScoreSet& s : score_sets) decisions.push_back(ensemble_decisions(model, s));
    model.discriminant = train_lda(decisions, labels, shrinkage);
    return model;
}

inline int predict_fusion(const FusionModel& model, const ScoreSet& scores) {
    return predict_lda(model.discriminant, ensemble_decisions(model, scores));
}

// ---- fusion model file (magic "AFFU") ----

inline constexpr std::uint32_t kFusionFormatVersion = 1;

inline void save_fusion(const FusionModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write fusion file: " + path);
    out.write("AFFU", 4);
    detail::write_u32(out, kFusionFormatVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(model.locals.size()));
    for (FeatureLabel l : model.locals) detail::write_u32(out, static_cast<std::uint32_t>(l));
    detail::write_u32(out, static_cast<std::uint32_t>(model.ensembles.size()));
    for (std::size_t i = 0; i < model.ensembles.size(); ++i) {
        const BoostEnsemble& e = model.ensembles[i];
        detail::write_u32(out, static_cast<std::uint32_t>(model.combos[i].index));
        detail::write_u32(out, static_cast<std::uint32_t>(e.vector_length));
        detail::write_u32(out, static_cast<std::uint32_t>(e.stumps.size()));
        for (std::size_t t = 0; t < e.stumps.size(); ++t) {
            detail::write_u32(out, static_cast<std::uint32_t>(e.stumps[t].component));
            detail::write_f64(out, e.stumps[t].threshold);
            detail::write_i32(out, e.stumps[t].polarity);
            detail::write_f64(out, e.alphas[t]);
        }
    }
    detail::write_u64(out, model.discriminant.weights.size());
    for (double w : model.discriminant.weights) detail::write_f64(out, w);
    detail::write_f64(out, model.discriminant.bias);
    detail::write_f64(out, model.discriminant.shrinkage);
    if (!out) throw Error("short write: " + path);
}

inline FusionModel load_fusion(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open fusion file: " + path);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::string(magic, 4) != "AFFU")
        throw Error(path + ": not a fusion model file (bad magic)");
    const std::uint32_t version = detail::read_u32(in, path);
    if (version != kFusionFormatVersion)
        throw Error(path + ": unsupported fusion format version " + std::to_string(version));
    FusionModel model;
    const std::uint32_t n_locals = detail::read_u32(in, path);
    if (n_locals == 0 || n_locals > 16) throw Error(path + ": corrupt local label count");
    for (std::uint32_t i = 0; i < n_locals; ++i) {
        const std::uint32_t l = detail::read_u32(in, path);
        if (l > 4) throw Error(path + ": corrupt feature label");
        model.locals.push_back(static_cast<FeatureLabel>(l));
    }
    model.combos = enumerate_combinations(model.locals);
    const std::uint32_t n_ens = detail::read_u32(in, path);
    if (n_ens != model.combos.size()) throw Error(path + ": ensemble count mismatch");
    for (std::uint32_t i = 0; i < n_ens; ++i) {
        const std::uint32_t index = detail::read_u32(in, path);
        if (static_cast<int>(index) != model.combos[i].index)
            throw Error(path + ": combination order mismatch");
        BoostEnsemble e;
        e.vector_length = static_cast<int>(detail::read_u32(in, path));
        if (e.vector_length != model.combos[i].vector_length())
            throw Error(path + ": ensemble vector length mismatch");
        const std::uint32_t n_stumps = detail::read_u32(in, path);
        if (n_stumps > (1u << 20)) throw Error(path + ": corrupt stump count");
        for (std::uint32_t t = 0; t < n_stumps; ++t) {
            DecisionStump s;
            s.component = static_cast<int>(detail::read_u32(in, path));
            if (s.component >= e.vector_length) throw Error(path + ": stump component out of range");
            s.threshold = detail::read_f64(in, path);
            s.polarity = detail::read_i32(in, path);
            if (s.polarity != +1 && s.polarity != -1) throw Error(path + ": corrupt stump polarity");
            const double alpha = detail::read_f64(in, path);
            if (!std::isfinite(alpha)) throw Error(path + ": non-finite alpha");
            e.stumps.push_back(s);
            e.alphas.push_back(alpha);
        }
        model.ensembles.push_back(std::move(e));
    }
    const std::uint64_t dim = detail::read_u64(in, path);
    if (dim != model.ensembles.size()) throw Error(path + ": discriminant dimension mismatch");
    model.discriminant.weights.resize(dim);
    for (std::uint64_t j = 0; j < dim; ++j)
        model.discriminant.weights[j] = detail::read_f64(in, path);
    model.discriminant.bias = detail::read_f64(in, path);
    model.discriminant.shrinkage = detail::read_f64(in, path);
    return model;
}

}  // namespace afif4
