#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "advbench/ops.hpp"
#include "advbench/rng.hpp"

namespace advbench {

enum class Mode { train, eval_deterministic, eval_stochastic };

enum class LayerKind { conv, relu, maxpool, dense, softmax_head, dropout, random_spiking };

struct LayerSpec {
    LayerKind kind;
    // conv
    int out_channels = 0;
    int kernel = 3;
    Padding padding = Padding::valid;
    // dense / softmax_head
    int units = 0;
    // dropout
    double rate = 0.0;
    // random_spiking
    double keep_prob = 1.0;

    static LayerSpec conv2d(int out_channels, int kernel = 3,
                            Padding padding = Padding::valid) {
        LayerSpec s{LayerKind::conv};
        s.out_channels = out_channels;
        s.kernel = kernel;
        s.padding = padding;
        return s;
    }
    static LayerSpec relu() { return LayerSpec{LayerKind::relu}; }
    static LayerSpec maxpool() { return LayerSpec{LayerKind::maxpool}; }
    static LayerSpec dense(int units) {
        LayerSpec s{LayerKind::dense};
        s.units = units;
        return s;
    }
    static LayerSpec softmax_head(int classes) {
        LayerSpec s{LayerKind::softmax_head};
        s.units = classes;
        return s;
    }
    static LayerSpec dropout(double rate) {
        check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
        LayerSpec s{LayerKind::dropout};
        s.rate = rate;
        return s;
    }
    static LayerSpec random_spiking(double keep_prob) {
        check(keep_prob > 0.0 && keep_prob <= 1.0,
              "random_spiking: keep probability must be in (0,1]");
        LayerSpec s{LayerKind::random_spiking};
        s.keep_prob = keep_prob;
        return s;
    }
};

// One sampled spiking outcome: which units were replaced, by what, and the
// batch value range the noise was drawn from. Logged so experiments can
// revisit the realized ranges.
struct SpikeRealization {
    std::vector<std::uint8_t> spiked;  // 1 = unit output replaced by noise
    std::vector<double> noise;         // same length; meaningful where spiked
    double batch_min = 0.0;
    double batch_max = 0.0;
};

// Random Spiking filter. Keeps each unit with probability keep_prob; a
// replaced unit outputs uniform noise over the [min,max] of the whole input
// tensor (all units, all batch elements). Backprop through replaced units is
// blocked; kept units pass gradient unchanged.
inline Tensor random_spiking_forward(const Tensor& input, double keep_prob, Rng& rng,
                                     SpikeRealization* realization_out = nullptr) {
    // The op itself admits p=0 (everything spiked); layer configs keep p in (0,1].
    check(keep_prob >= 0.0 && keep_prob <= 1.0,
          "random_spiking: keep probability must be in [0,1]");
    check(input.size() > 0, "random_spiking: empty batch");
    const auto& in = input.data();
    auto realization = std::make_shared<SpikeRealization>();
    realization->spiked.assign(in.size(), 0);
    realization->noise.assign(in.size(), 0.0);
    double lo = in[0], hi = in[0];
    for (double v : in) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    realization->batch_min = lo;
    realization->batch_max = hi;

    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (keep_prob < 1.0 && rng.bernoulli(1.0 - keep_prob)) {
            const double eps = rng.uniform(lo, hi);
            realization->spiked[i] = 1;
            realization->noise[i] = eps;
            out[i] = eps;
        } else {
            out[i] = in[i];
        }
    }
    if (realization_out) *realization_out = *realization;
    return make_op_result("random_spiking", input.shape(), std::move(out), {input},
                          [px = input.impl(), realization](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  if (!realization->spiked[i]) px->grad[i] += o.grad[i];
                          });
}

// Data-level counterpart used when a realization must be replayed against an
// arbitrary upstream gradient (shape-checked against the forward call).
inline std::vector<double> random_spiking_backward(const std::vector<double>& upstream,
                                                   const SpikeRealization& realization) {
    if (upstream.size() != realization.spiked.size())
        fail("random_spiking_backward: gradient size ", upstream.size(),
             " does not match forward size ", realization.spiked.size());
    std::vector<double> out(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i)
        out[i] = realization.spiked[i] ? 0.0 : upstream[i];
    return out;
}

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate), identity in eval_deterministic mode.
inline Tensor dropout_forward(const Tensor& input, double rate, Rng& rng, Mode mode) {
    check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (mode == Mode::eval_deterministic || rate == 0.0) return input;
    const double scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<std::uint8_t>>(input.data().size());
    std::vector<double> out(input.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const bool keep = !rng.bernoulli(rate);
        (*mask)[i] = keep ? 1 : 0;
        out[i] = keep ? input.data()[i] * scale : 0.0;
    }
    return make_op_result("dropout", input.shape(), std::move(out), {input},
                          [px = input.impl(), mask, scale](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  if ((*mask)[i]) px->grad[i] += o.grad[i] * scale;
                          });
}

}  // namespace advbench
