#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "afif4/binio.hpp"
#include "afif4/image.hpp"
#include "afif4/manifest.hpp"

namespace afif4 {

enum class LayerKind : std::uint32_t {
    Convolution = 0,
    FullyConnected = 1,
    Activation = 2,  // ReLU
    MaxPool = 3,
    Softmax = 4,
};

struct LayerSpec {
    LayerKind kind = LayerKind::Activation;
    int filters = 0;  // convolution
    int kernel = 0;   // convolution, max-pool
    int stride = 1;   // convolution, max-pool
    int width = 0;    // fully-connected

    static LayerSpec conv(int filters, int kernel, int stride) {
        return LayerSpec{LayerKind::Convolution, filters, kernel, stride, 0};
    }
    static LayerSpec fc(int width) { return LayerSpec{LayerKind::FullyConnected, 0, 0, 1, width}; }
    static LayerSpec relu() { return LayerSpec{LayerKind::Activation, 0, 0, 1, 0}; }
    static LayerSpec pool(int kernel, int stride) {
        return LayerSpec{LayerKind::MaxPool, 0, kernel, stride, 0};
    }
    static LayerSpec softmax() { return LayerSpec{LayerKind::Softmax, 0, 0, 1, 0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct TensorShape {
    int h = 0, w = 0, c = 0;
    int count() const { return h * w * c; }
    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct NetworkSpec {
    std::string name;
    int input_size = 0;  // square input
    int input_channels = 0;
    std::vector<LayerSpec> layers;

    // Output shape of every stage: element 0 is the input shape,
    // element i+1 the output of layer i. Throws on an inconsistent
    // chain (kernel larger than its input, wrong softmax arity, ...).
    std::vector<TensorShape> shape_chain() const {
        if (input_size < 1 || input_channels < 1)
            throw Error("network spec '" + name + "': invalid input shape");
        if (layers.empty() || layers.back().kind != LayerKind::Softmax)
            throw Error("network spec '" + name + "': must end in a softmax layer");
        std::vector<TensorShape> chain;
        chain.push_back(TensorShape{input_size, input_size, input_channels});
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerSpec& l = layers[i];
            TensorShape in = chain.back();
            TensorShape out = in;
            switch (l.kind) {
                case LayerKind::Convolution:
                case LayerKind::MaxPool: {
                    if (l.kernel < 1 || l.stride < 1)
                        throw Error("network spec '" + name + "': kernel and stride must be >= 1");
                    if (l.kind == LayerKind::Convolution && l.filters < 1)
                        throw Error("network spec '" + name + "': filter count must be >= 1");
                    if (in.h < l.kernel || in.w < l.kernel)
                        throw Error("network spec '" + name + "': layer " + std::to_string(i) +
                                    " kernel exceeds its input");
                    out.h = (in.h - l.kernel) / l.stride + 1;
                    out.w = (in.w - l.kernel) / l.stride + 1;
                    if (l.kind == LayerKind::Convolution) out.c = l.filters;
                    break;
                }
                case LayerKind::FullyConnected:
                    if (l.width < 1)
                        throw Error("network spec '" + name + "': fc width must be >= 1");
                    out = TensorShape{1, 1, l.width};
                    break;
                case LayerKind::Activation:
                    break;
                case LayerKind::Softmax:
                    if (i + 1 != layers.size())
                        throw Error("network spec '" + name + "': softmax must be the final layer");
                    if (in.count() != 2)
                        throw Error("network spec '" + name +
                                    "': softmax input must be 2 units, got " +
                                    std::to_string(in.count()));
                    break;
            }
            chain.push_back(out);
        }
        return chain;
    }

    std::size_t parameter_count() const {
        const auto chain = shape_chain();
        std::size_t total = 0;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerSpec& l = layers[i];
            if (l.kind == LayerKind::Convolution)
                total += static_cast<std::size_t>(l.filters) * chain[i].c * l.kernel * l.kernel +
                         l.filters;
            else if (l.kind == LayerKind::FullyConnected)
                total += static_cast<std::size_t>(l.width) * chain[i].count() + l.width;
        }
        return total;
    }
};

struct TrainConfig {
    double learning_rate = 0.01;
    int iterations = 1000;
    int batch_size = 8;
    std::uint64_t seed = 1;
    double init_scale = 1.0;
};

// Weights and biases for every parameterized layer, two tensors per
// conv/fc layer in declaration order (weights then bias).
struct NetworkState {
    NetworkSpec spec;
    std::vector<std::vector<double>> tensors;
};

// ---- presets ----

// Literal architecture string "afif4-paper": three consecutive 9-filter
// 3x3 layers, no pooling, three fully-connected layers ending in the
// 2-way softmax. FC widths are not pinned anywhere authoritative; 512
// keeps the model constructible on a desktop.
inline NetworkSpec spec_afif4_paper() {
    NetworkSpec s;
    s.name = "afif4-paper";
    s.input_size = 227;
    s.input_channels = 3;
    s.layers = {LayerSpec::conv(96, 11, 4), LayerSpec::relu(),
                LayerSpec::conv(256, 5, 1), LayerSpec::relu(),
                LayerSpec::conv(9, 3, 1),   LayerSpec::relu(),
                LayerSpec::conv(9, 3, 1),   LayerSpec::relu(),
                LayerSpec::conv(9, 3, 1),   LayerSpec::relu(),
                LayerSpec::fc(512),         LayerSpec::relu(),
                LayerSpec::fc(512),         LayerSpec::relu(),
                LayerSpec::fc(2),           LayerSpec::softmax()};
    return s;
}

// Alternate wide preset: the 9-filter width of conv3-5 in "afif4-paper"
// is suspiciously narrow next to the reference model it adapts, so this
// variant restores reference-scale widths and max-pooling.
inline NetworkSpec spec_afif4_wide() {
    NetworkSpec s;
    s.name = "afif4-wide";
    s.input_size = 227;
    s.input_channels = 3;
    s.layers = {LayerSpec::conv(96, 11, 4),  LayerSpec::relu(), LayerSpec::pool(3, 2),
                LayerSpec::conv(256, 5, 1),  LayerSpec::relu(), LayerSpec::pool(3, 2),
                LayerSpec::conv(384, 3, 1),  LayerSpec::relu(),
                LayerSpec::conv(384, 3, 1),  LayerSpec::relu(),
                LayerSpec::conv(256, 3, 1),  LayerSpec::relu(), LayerSpec::pool(3, 2),
                LayerSpec::fc(512),          LayerSpec::relu(),
                LayerSpec::fc(512),          LayerSpec::relu(),
                LayerSpec::fc(2),            LayerSpec::softmax()};
    return s;
}

// Desk-scale preset used by the test and evaluation harnesses.
inline NetworkSpec spec_afif4_tiny(int channels = 1) {
    NetworkSpec s;
    s.name = "afif4-tiny";
    s.input_size = 32;
    s.input_channels = channels;
    s.layers = {LayerSpec::conv(8, 5, 2), LayerSpec::relu(),
                LayerSpec::conv(16, 3, 1), LayerSpec::relu(),
                LayerSpec::fc(32), LayerSpec::relu(),
                LayerSpec::fc(2), LayerSpec::softmax()};
    return s;
}

inline NetworkSpec spec_from_preset(const std::string& preset, int channels = 3) {
    if (preset == "afif4-paper") return spec_afif4_paper();
    if (preset == "afif4-wide") return spec_afif4_wide();
    if (preset == "afif4-tiny") return spec_afif4_tiny(channels);
    throw Error("unknown network preset '" + preset + "'");
}

// Gaussian init scaled by 1/sqrt(fan-in); biases start at zero.
inline NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed,
                                 double init_scale = 1.0) {
    const auto chain = spec.shape_chain();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    NetworkState net;
    net.spec = spec;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind == LayerKind::Convolution) {
            const std::size_t fan_in = static_cast<std::size_t>(chain[i].c) * l.kernel * l.kernel;
            std::vector<double> w(static_cast<std::size_t>(l.filters) * fan_in);
            const double sd = init_scale / std::sqrt(static_cast<double>(fan_in));
            for (double& v : w) v = sd * normal(rng);
            net.tensors.push_back(std::move(w));
            net.tensors.emplace_back(l.filters, 0.0);
        } else if (l.kind == LayerKind::FullyConnected) {
            const std::size_t fan_in = static_cast<std::size_t>(chain[i].count());
            std::vector<double> w(static_cast<std::size_t>(l.width) * fan_in);
            const double sd = init_scale / std::sqrt(static_cast<double>(fan_in));
            for (double& v : w) v = sd * normal(rng);
            net.tensors.push_back(std::move(w));
            net.tensors.emplace_back(l.width, 0.0);
        }
    }
    return net;
}

namespace detail {

struct ForwardTrace {
    std::vector<std::vector<double>> act;       // act[0] = input, act[i+1] = layer i output
    std::vector<std::vector<int>> pool_argmax;  // one entry per max-pool layer, in order
};

// Index of the weight tensor of each layer (bias follows at +1);
// layers without parameters map to -1.
inline std::vector<int> tensor_offsets(const NetworkSpec& spec) {
    std::vector<int> offsets(spec.layers.size(), -1);
    int at = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerKind kind = spec.layers[li].kind;
        if (kind == LayerKind::Convolution || kind == LayerKind::FullyConnected) {
            offsets[li] = at;
            at += 2;
        }
    }
    return offsets;
}

// One layer, x -> y. Activation layout matches ImageBuffer planes:
// index (c*h + y)*w + x. argmax may be null when no backward pass will
// follow.
inline void apply_layer(const NetworkState& net, std::size_t li, int tensor_at,
                        const TensorShape& in, const TensorShape& out,
                        const std::vector<double>& x, std::vector<double>& y,
                        std::vector<int>* argmax) {
    const LayerSpec& l = net.spec.layers[li];
    y.resize(static_cast<std::size_t>(out.count()));
    switch (l.kind) {
        case LayerKind::Convolution: {
            const std::vector<double>& w = net.tensors[tensor_at];
            const std::vector<double>& b = net.tensors[tensor_at + 1];
            const int k = l.kernel, s = l.stride;
            const std::size_t ksq = static_cast<std::size_t>(k) * k;
            for (int f = 0; f < out.c; ++f)
                for (int oy = 0; oy < out.h; ++oy)
                    for (int ox = 0; ox < out.w; ++ox) {
                        double acc = b[f];
                        for (int ci = 0; ci < in.c; ++ci) {
                            const double* wrow =
                                w.data() + (static_cast<std::size_t>(f) * in.c + ci) * ksq;
                            for (int ky = 0; ky < k; ++ky) {
                                const double* xrow = x.data() +
                                                     (static_cast<std::size_t>(ci) * in.h +
                                                      (oy * s + ky)) * in.w + ox * s;
                                for (int kx = 0; kx < k; ++kx)
                                    acc += wrow[static_cast<std::size_t>(ky) * k + kx] * xrow[kx];
                            }
                        }
                        y[(static_cast<std::size_t>(f) * out.h + oy) * out.w + ox] = acc;
                    }
            break;
        }
        case LayerKind::FullyConnected: {
            const std::vector<double>& w = net.tensors[tensor_at];
            const std::vector<double>& b = net.tensors[tensor_at + 1];
            const std::size_t n_in = static_cast<std::size_t>(in.count());
            for (int o = 0; o < out.c; ++o) {
                double acc = b[o];
                const double* row = w.data() + static_cast<std::size_t>(o) * n_in;
                for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
                y[o] = acc;
            }
            break;
        }
        case LayerKind::Activation:
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
            break;
        case LayerKind::MaxPool: {
            if (argmax) argmax->resize(y.size());
            const int k = l.kernel, s = l.stride;
            for (int c = 0; c < out.c; ++c)
                for (int oy = 0; oy < out.h; ++oy)
                    for (int ox = 0; ox < out.w; ++ox) {
                        int best = (c * in.h + oy * s) * in.w + ox * s;
                        double best_v = x[best];
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int idx = (c * in.h + (oy * s + ky)) * in.w + (ox * s + kx);
                                if (x[idx] > best_v) {
                                    best_v = x[idx];
                                    best = idx;
                                }
                            }
                        const std::size_t oidx =
                            (static_cast<std::size_t>(c) * out.h + oy) * out.w + ox;
                        y[oidx] = best_v;
                        if (argmax) (*argmax)[oidx] = best;
                    }
            break;
        }
        case LayerKind::Softmax: {
            const double m = std::max(x[0], x[1]);
            const double e0 = std::exp(x[0] - m), e1 = std::exp(x[1] - m);
            y[0] = e0 / (e0 + e1);
            y[1] = e1 / (e0 + e1);
            break;
        }
    }
}

inline void forward_trace(const NetworkState& net, const std::vector<double>& input,
                          const std::vector<TensorShape>& chain, ForwardTrace& trace) {
    const std::size_t n_layers = net.spec.layers.size();
    trace.act.resize(n_layers + 1);
    trace.act[0] = input;
    std::size_t tensor_at = 0;
    std::size_t pool_at = 0;
    for (std::size_t li = 0; li < n_layers; ++li) {
        const LayerKind kind = net.spec.layers[li].kind;
        std::vector<int>* argmax = nullptr;
        if (kind == LayerKind::MaxPool) {
            if (trace.pool_argmax.size() <= pool_at) trace.pool_argmax.emplace_back();
            argmax = &trace.pool_argmax[pool_at++];
        }
        apply_layer(net, li, static_cast<int>(tensor_at), chain[li], chain[li + 1], trace.act[li],
                    trace.act[li + 1], argmax);
        if (kind == LayerKind::Convolution || kind == LayerKind::FullyConnected) tensor_at += 2;
    }
}

// Loss recomputed from layer `start` onward, reusing the cached
// activations of an unperturbed prefix. Lets the finite-difference
// probe of a parameter in layer L skip all work before L.
inline double loss_from_layer(const NetworkState& net, const std::vector<TensorShape>& chain,
                              const std::vector<int>& offsets, const ForwardTrace& base,
                              std::size_t start, int target, std::vector<double>& a,
                              std::vector<double>& b) {
    const std::size_t n_layers = net.spec.layers.size();
    const std::vector<double>* x = &base.act[start];
    std::vector<double>* y = &a;
    for (std::size_t li = start; li < n_layers; ++li) {
        apply_layer(net, li, offsets[li], chain[li], chain[li + 1], *x, *y, nullptr);
        x = y;
        y = (y == &a) ? &b : &a;
    }
    return -std::log(std::max((*x)[target], 1e-300));
}

// Cross-entropy gradient w.r.t. every parameter; layout mirrors
// NetworkState::tensors. target is the class index (0 or 1).
inline void backward_trace(const NetworkState& net, const ForwardTrace& trace,
                           const std::vector<TensorShape>& chain, int target,
                           std::vector<std::vector<double>>& grads) {
    const std::size_t n_layers = net.spec.layers.size();
    // softmax + cross-entropy combined: dL/dlogits = p - onehot
    const std::vector<double>& probs = trace.act[n_layers];
    std::vector<double> delta = {probs[0] - (target == 0 ? 1.0 : 0.0),
                                 probs[1] - (target == 1 ? 1.0 : 0.0)};

    std::size_t tensor_at = net.tensors.size();
    std::size_t pool_at = trace.pool_argmax.size();
    for (std::size_t li = n_layers - 1; li-- > 0;) {  // softmax handled above
        const LayerSpec& l = net.spec.layers[li];
        const TensorShape in = chain[li], out = chain[li + 1];
        const std::vector<double>& x = trace.act[li];
        std::vector<double> dx(static_cast<std::size_t>(in.count()), 0.0);
        switch (l.kind) {
            case LayerKind::Convolution: {
                tensor_at -= 2;
                const std::vector<double>& w = net.tensors[tensor_at];
                std::vector<double>& dw = grads[tensor_at];
                std::vector<double>& db = grads[tensor_at + 1];
                const int k = l.kernel, s = l.stride;
                for (int f = 0; f < out.c; ++f)
                    for (int oy = 0; oy < out.h; ++oy)
                        for (int ox = 0; ox < out.w; ++ox) {
                            const double d =
                                delta[(static_cast<std::size_t>(f) * out.h + oy) * out.w + ox];
                            if (d == 0.0) continue;
                            db[f] += d;
                            for (int ci = 0; ci < in.c; ++ci)
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx) {
                                        const std::size_t widx =
                                            ((static_cast<std::size_t>(f) * in.c + ci) * k + ky) *
                                                k + kx;
                                        const std::size_t xidx =
                                            (static_cast<std::size_t>(ci) * in.h + (oy * s + ky)) *
                                                in.w + (ox * s + kx);
                                        dw[widx] += d * x[xidx];
                                        dx[xidx] += d * w[widx];
                                    }
                        }
                break;
            }
            case LayerKind::FullyConnected: {
                tensor_at -= 2;
                const std::vector<double>& w = net.tensors[tensor_at];
                std::vector<double>& dw = grads[tensor_at];
                std::vector<double>& db = grads[tensor_at + 1];
                const std::size_t n_in = static_cast<std::size_t>(in.count());
                for (int o = 0; o < out.c; ++o) {
                    const double d = delta[o];
                    db[o] += d;
                    if (d == 0.0) continue;
                    const double* row = w.data() + static_cast<std::size_t>(o) * n_in;
                    double* drow = dw.data() + static_cast<std::size_t>(o) * n_in;
                    for (std::size_t i = 0; i < n_in; ++i) {
                        drow[i] += d * x[i];
                        dx[i] += d * row[i];
                    }
                }
                break;
            }
            case LayerKind::Activation:
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = x[i] > 0.0 ? delta[i] : 0.0;
                break;
            case LayerKind::MaxPool: {
                const std::vector<int>& argmax = trace.pool_argmax[--pool_at];
                for (std::size_t i = 0; i < delta.size(); ++i) dx[argmax[i]] += delta[i];
                break;
            }
            case LayerKind::Softmax:
                break;  // unreachable: softmax is always last
        }
        delta = std::move(dx);
    }
}

inline std::vector<std::vector<double>> zero_grads(const NetworkState& net) {
    std::vector<std::vector<double>> grads;
    grads.reserve(net.tensors.size());
    for (const auto& t : net.tensors) grads.emplace_back(t.size(), 0.0);
    return grads;
}

inline void check_input(const NetworkState& net, const ImageBuffer& input) {
    if (input.width != net.spec.input_size || input.height != net.spec.input_size ||
        input.channels != net.spec.input_channels)
        throw Error("network '" + net.spec.name + "' expects " +
                    std::to_string(net.spec.input_size) + "x" +
                    std::to_string(net.spec.input_size) + "x" +
                    std::to_string(net.spec.input_channels) + " input, got " +
                    std::to_string(input.width) + "x" + std::to_string(input.height) + "x" +
                    std::to_string(input.channels));
}

inline int class_index(int label) {
    if (label == kMale) return 0;
    if (label == kFemale) return 1;
    throw Error("label must be +1 or -1, got " + std::to_string(label));
}

}  // namespace detail

// Class probabilities (index 0 = +1/MALE, index 1 = -1/FEMALE).
inline std::array<double, 2> forward(const NetworkState& net, const ImageBuffer& input) {
    detail::check_input(net, input);
    const auto chain = net.spec.shape_chain();
    detail::ForwardTrace trace;
    detail::forward_trace(net, input.pixels, chain, trace);
    const std::vector<double>& p = trace.act.back();
    return {p[0], p[1]};
}

// Winning class and its softmax probability; an exact tie goes to +1.
inline std::pair<int, double> predict_score(const NetworkState& net, const ImageBuffer& patch) {
    const auto probs = forward(net, patch);
    return probs[0] >= probs[1] ? std::make_pair(kMale, probs[0])
                                : std::make_pair(kFemale, probs[1]);
}

// Minibatch SGD on cross-entropy over cfg.iterations steps, sampling
// with replacement from a generator seeded with cfg.seed. Deterministic
// for a fixed seed; learning rate 0 returns the input state unchanged.
inline NetworkState train(const NetworkState& net,
                          const std::vector<std::pair<ImageBuffer, int>>& samples,
                          const TrainConfig& cfg) {
    if (samples.empty()) throw Error("train: no samples");
    if (cfg.iterations < 1 || cfg.batch_size < 1) throw Error("train: bad config");
    for (const auto& [img, label] : samples) {
        detail::check_input(net, img);
        detail::class_index(label);
    }
    const auto chain = net.spec.shape_chain();

    NetworkState state = net;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    detail::ForwardTrace trace;
    auto grads = detail::zero_grads(state);
    for (int it = 0; it < cfg.iterations; ++it) {
        for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& [img, label] = samples[pick(rng)];
            const int target = detail::class_index(label);
            detail::forward_trace(state, img.pixels, chain, trace);
            loss += -std::log(std::max(trace.act.back()[target], 1e-300));
            detail::backward_trace(state, trace, chain, target, grads);
        }
        loss /= cfg.batch_size;
        if (!std::isfinite(loss))
            throw Error("train: loss diverged (non-finite) at iteration " + std::to_string(it));
        if (cfg.learning_rate != 0.0) {
            const double step = cfg.learning_rate / cfg.batch_size;
            for (std::size_t t = 0; t < state.tensors.size(); ++t)
                for (std::size_t i = 0; i < state.tensors[t].size(); ++i)
                    state.tensors[t][i] -= step * grads[t][i];
        }
    }
    return state;
}

// Cross-entropy loss of one sample, the quantity gradient_check probes.
inline double sample_loss(const NetworkState& net, const ImageBuffer& input, int label) {
    detail::check_input(net, input);
    const int target = detail::class_index(label);
    const auto chain = net.spec.shape_chain();
    detail::ForwardTrace trace;
    detail::forward_trace(net, input.pixels, chain, trace);
    return -std::log(std::max(trace.act.back()[target], 1e-300));
}

// Compares analytic gradients against central finite differences of the
// loss for every parameter and returns the worst relative error, where
// rel = |a - n| / max(|a|, |n|, 1e-4). The floor keeps near-zero
// gradients from dominating the report. Probing a parameter of layer L
// only recomputes layers L onward.
inline double gradient_check(const NetworkState& net, const ImageBuffer& input, int label,
                             double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) throw Error("gradient_check: eps must be in [1e-6, 1e-3]");
    if (net.spec.parameter_count() > 100000)
        throw Error("gradient_check: spec too large (> 10^5 parameters)");
    detail::check_input(net, input);
    const int target = detail::class_index(label);
    const auto chain = net.spec.shape_chain();
    const auto offsets = detail::tensor_offsets(net.spec);

    detail::ForwardTrace trace;
    detail::forward_trace(net, input.pixels, chain, trace);
    auto grads = detail::zero_grads(net);
    detail::backward_trace(net, trace, chain, target, grads);

    std::vector<int> tensor_layer(net.tensors.size(), 0);
    for (std::size_t li = 0; li < offsets.size(); ++li)
        if (offsets[li] >= 0) {
            tensor_layer[offsets[li]] = static_cast<int>(li);
            tensor_layer[offsets[li] + 1] = static_cast<int>(li);
        }

    NetworkState probe = net;
    std::vector<double> scratch_a, scratch_b;
    double worst = 0.0;
    for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
        const std::size_t layer = tensor_layer[t];
        for (std::size_t i = 0; i < probe.tensors[t].size(); ++i) {
            const double saved = probe.tensors[t][i];
            probe.tensors[t][i] = saved + eps;
            const double lp = detail::loss_from_layer(probe, chain, offsets, trace, layer, target,
                                                      scratch_a, scratch_b);
            probe.tensors[t][i] = saved - eps;
            const double lm = detail::loss_from_layer(probe, chain, offsets, trace, layer, target,
                                                      scratch_a, scratch_b);
            probe.tensors[t][i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = grads[t][i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-4});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

inline double gradient_check(const NetworkSpec& spec, const ImageBuffer& input, int label,
                             double eps) {
    return gradient_check(init_network(spec, 12345), input, label, eps);
}

// ---- network bundle file (magic "AFNN") ----

inline constexpr std::uint32_t kNetworkFormatVersion = 1;

inline void save_network(const NetworkState& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write network file: " + path);
    out.write("AFNN", 4);
    detail::write_u32(out, kNetworkFormatVersion);
    detail::write_string(out, net.spec.name);
    detail::write_u32(out, static_cast<std::uint32_t>(net.spec.input_size));
    detail::write_u32(out, static_cast<std::uint32_t>(net.spec.input_channels));
    detail::write_u32(out, static_cast<std::uint32_t>(net.spec.layers.size()));
    for (const LayerSpec& l : net.spec.layers) {
        detail::write_u32(out, static_cast<std::uint32_t>(l.kind));
        detail::write_i32(out, l.filters);
        detail::write_i32(out, l.kernel);
        detail::write_i32(out, l.stride);
        detail::write_i32(out, l.width);
    }
    detail::write_u32(out, static_cast<std::uint32_t>(net.tensors.size()));
    for (const auto& t : net.tensors) {
        detail::write_u64(out, t.size());
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw Error("short write: " + path);
}

inline NetworkState load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open network file: " + path);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::string(magic, 4) != "AFNN")
        throw Error(path + ": not a network file (bad magic)");
    const std::uint32_t version = detail::read_u32(in, path);
    if (version != kNetworkFormatVersion)
        throw Error(path + ": unsupported network format version " + std::to_string(version));
    NetworkState net;
    net.spec.name = detail::read_string(in, path);
    net.spec.input_size = static_cast<int>(detail::read_u32(in, path));
    net.spec.input_channels = static_cast<int>(detail::read_u32(in, path));
    const std::uint32_t n_layers = detail::read_u32(in, path);
    if (n_layers > 1024) throw Error(path + ": corrupt layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        const std::uint32_t kind = detail::read_u32(in, path);
        if (kind > static_cast<std::uint32_t>(LayerKind::Softmax))
            throw Error(path + ": corrupt layer kind");
        l.kind = static_cast<LayerKind>(kind);
        l.filters = detail::read_i32(in, path);
        l.kernel = detail::read_i32(in, path);
        l.stride = detail::read_i32(in, path);
        l.width = detail::read_i32(in, path);
        net.spec.layers.push_back(l);
    }
    const std::uint32_t n_tensors = detail::read_u32(in, path);
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
        const std::uint64_t len = detail::read_u64(in, path);
        if (len > (1ull << 32)) throw Error(path + ": corrupt tensor length");
        std::vector<double> data(len);
        if (!in.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(len * sizeof(double))))
            throw Error(path + ": truncated tensor data");
        net.tensors.push_back(std::move(data));
    }
    net.spec.shape_chain();  // validates the loaded spec
    for (const auto& t : net.tensors)
        for (double v : t)
            if (!std::isfinite(v)) throw Error(path + ": non-finite weight value");
    return net;
}

}  // namespace afif4
