#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advbench/layers.hpp"

namespace advbench {

struct NamedParam {
    std::string name;
    Tensor value;
};

// Ordered layer stack plus its parameters. Models in eval modes are treated
// as immutable; each evaluation carries its own RNG stream.
struct Model {
    std::vector<LayerSpec> layers;
    Shape input_shape;  // {H, W, C}
    std::uint64_t seed = 0;
    std::string scheme = "standard";
    Mode mode = Mode::eval_deterministic;
    std::vector<NamedParam> params;  // construction order, stable for checkpoints

    int num_classes() const {
        for (auto it = layers.rbegin(); it != layers.rend(); ++it)
            if (it->kind == LayerKind::softmax_head) return it->units;
        return 0;
    }

    Tensor& param(const std::string& name) {
        for (auto& p : params)
            if (p.name == name) return p.value;
        fail("model: unknown parameter ", name);
    }
    const Tensor& param(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p.value;
        fail("model: unknown parameter ", name);
    }

    std::vector<Tensor> param_tensors() const {
        std::vector<Tensor> out;
        out.reserve(params.size());
        for (const auto& p : params) out.push_back(p.value);
        return out;
    }

    void set_params_requires_grad(bool rg) {
        for (auto& p : params) p.value.set_requires_grad(rg);
    }
    void freeze_params() { set_params_requires_grad(false); }

    void zero_grads() {
        for (auto& p : params) p.value.zero_grad();
    }

    std::uint64_t params_hash() const {
        Fnv1a h;
        for (const auto& p : params) {
            h.update(p.name);
            h.update(p.value.data().data(), p.value.data().size() * sizeof(double));
        }
        return h.digest();
    }
};

namespace detail {

inline std::string layer_desc(std::size_t idx, const LayerSpec& l) {
    const char* names[] = {"conv", "relu", "maxpool", "dense", "softmax_head",
                           "dropout", "random_spiking"};
    return format_msg("layer ", idx, " (", names[static_cast<int>(l.kind)], ")");
}

}  // namespace detail

// Builds the parameter set for a layer stack, validating that shapes chain
// from the declared input. He-uniform init for conv/dense weights, zero
// biases; deterministic under the seed.
inline Model build_model(std::vector<LayerSpec> layers, Shape input_shape,
                         std::uint64_t seed) {
    check(input_shape.size() == 3, "build_model: input shape must be {H,W,C}");
    Model model;
    model.layers = std::move(layers);
    model.input_shape = input_shape;
    model.seed = seed;

    int rs_count = 0;
    for (const auto& l : model.layers)
        if (l.kind == LayerKind::random_spiking) ++rs_count;
    check(rs_count <= 1, "build_model: at most one random_spiking layer is supported");

    auto he_uniform = [](Tensor& t, int fan_in, Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : t.data()) v = rng.uniform(-limit, limit);
    };

    // cur mirrors the per-instance shape as the stack is walked; dense layers
    // implicitly flatten whatever precedes them.
    Shape cur = input_shape;
    bool flattened = false;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        Rng rng(derive_seed(seed, 0x6c617965u, static_cast<std::uint64_t>(i)));
        switch (l.kind) {
            case LayerKind::conv: {
                if (flattened || cur.size() != 3)
                    fail("build_model: ", detail::layer_desc(i, l),
                         " cannot follow flattened shape ", shape_str(cur));
                const int pad = l.padding == Padding::same ? (l.kernel - 1) / 2 : 0;
                const int oh = cur[0] - l.kernel + 1 + 2 * pad;
                const int ow = cur[1] - l.kernel + 1 + 2 * pad;
                if (oh <= 0 || ow <= 0)
                    fail("build_model: ", detail::layer_desc(i, l), " kernel ", l.kernel,
                         " does not fit input ", shape_str(cur));
                Tensor w = Tensor::zeros({l.kernel, l.kernel, cur[2], l.out_channels}, true);
                he_uniform(w, l.kernel * l.kernel * cur[2], rng);
                Tensor b = Tensor::zeros({l.out_channels}, true);
                model.params.push_back({format_msg("layer", i, ".W"), w});
                model.params.push_back({format_msg("layer", i, ".b"), b});
                cur = {oh, ow, l.out_channels};
                break;
            }
            case LayerKind::maxpool: {
                if (flattened || cur.size() != 3 || cur[0] < 2 || cur[1] < 2)
                    fail("build_model: ", detail::layer_desc(i, l),
                         " cannot pool shape ", shape_str(cur));
                cur = {cur[0] / 2, cur[1] / 2, cur[2]};
                break;
            }
            case LayerKind::dense:
            case LayerKind::softmax_head: {
                const int in_units = static_cast<int>(numel(cur));
                Tensor w = Tensor::zeros({in_units, l.units}, true);
                he_uniform(w, in_units, rng);
                Tensor b = Tensor::zeros({l.units}, true);
                model.params.push_back({format_msg("layer", i, ".W"), w});
                model.params.push_back({format_msg("layer", i, ".b"), b});
                cur = {l.units};
                flattened = true;
                break;
            }
            case LayerKind::relu:
            case LayerKind::dropout:
            case LayerKind::random_spiking:
                break;
        }
    }
    if (model.layers.empty() || model.layers.back().kind != LayerKind::softmax_head)
        fail("build_model: stack must end in a softmax_head, got ",
             model.layers.empty() ? "empty stack"
                                  : detail::layer_desc(model.layers.size() - 1,
                                                       model.layers.back()));
    return model;
}

// Forward pass to logits. x is [B,H,W,C]; dropout and random spiking follow
// the given mode. Spike realizations are appended to spike_log when provided.
inline Tensor forward(const Model& model, const Tensor& x, Mode mode, Rng& rng,
                      std::vector<SpikeRealization>* spike_log = nullptr) {
    if (x.shape().size() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != model.input_shape)
        fail("forward: input ", shape_str(x.shape()), " does not match model input ",
             shape_str(model.input_shape));
    check(x.shape()[0] > 0, "forward: empty batch");
    Tensor cur = x;
    std::size_t param_idx = 0;
    auto next_param = [&]() -> const Tensor& {
        return model.params[param_idx++].value;
    };
    for (const auto& l : model.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                const Tensor& w = next_param();
                const Tensor& b = next_param();
                cur = conv2d(cur, w, b, l.padding);
                break;
            }
            case LayerKind::relu:
                cur = relu(cur);
                break;
            case LayerKind::maxpool:
                cur = maxpool2x2(cur);
                break;
            case LayerKind::dense:
            case LayerKind::softmax_head: {
                if (cur.shape().size() != 2) {
                    const int B = cur.shape()[0];
                    cur = cur.reshaped({B, static_cast<int>(cur.size() / B)});
                }
                const Tensor& w = next_param();
                const Tensor& b = next_param();
                cur = linear(cur, w, b);
                break;
            }
            case LayerKind::dropout:
                cur = dropout_forward(cur, l.rate, rng, mode);
                break;
            case LayerKind::random_spiking: {
                if (mode == Mode::eval_deterministic) break;  // identity
                SpikeRealization realization;
                cur = random_spiking_forward(cur, l.keep_prob, rng,
                                             spike_log ? &realization : nullptr);
                if (spike_log) spike_log->push_back(std::move(realization));
                break;
            }
        }
    }
    return cur;
}

inline Tensor forward(const Model& model, const Tensor& x, Rng& rng) {
    return forward(model, x, model.mode, rng);
}

// Deterministic logits with no graph recording; the common inference path.
inline Tensor logits_deterministic(const Model& model, const Tensor& x) {
    NoGradGuard ng;
    Rng rng(0);  // unused by deterministic layers
    return forward(model, x, Mode::eval_deterministic, rng);
}

}  // namespace advbench
