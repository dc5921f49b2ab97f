#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "advbench/model.hpp"
#include "advbench/optim.hpp"

namespace advbench {

struct AttackConfig {
    enum class Kind { fgs, cw_l2 };
    Kind kind = Kind::cw_l2;
    double confidence = 0.0;  // K
    int adam_steps = 1000;
    double adam_lr = 0.1;
    double initial_c = 1e-2;
    int c_rounds = 6;
    double l2_cutoff = 3.0;
    std::uint64_t seed = 0;
    bool abort_early = true;
    // EOT-style variant: average the attack gradient over k stochastic
    // forward passes instead of one deterministic pass. Off by default.
    bool eot = false;
    int eot_samples = 8;
    double fgs_step = 0.2;

    void validate() const {
        check(confidence >= 0.0, "attack: confidence K must be >= 0");
        check(l2_cutoff > 0.0, "attack: L2 cutoff must be positive");
        check(adam_steps > 0 && c_rounds > 0, "attack: steps and rounds must be positive");
    }
};

struct AdversarialExample {
    Tensor original;   // [1,H,W,C]
    Tensor perturbed;  // [1,H,W,C], pixels in [0,1]
    int true_label = -1;
    int target_label = -1;  // -1 = untargeted
    double confidence = 0.0;
    double l2 = 0.0;
    std::string scheme;
    std::vector<std::uint32_t> surrogate_ids;
    std::uint32_t original_index = 0;
};

struct AttackOutcome {
    enum class Status { success, failure, skipped_misclassified };
    Status status = Status::failure;
    std::optional<AdversarialExample> example;

    bool ok() const { return status == Status::success; }
    bool skipped() const { return status == Status::skipped_misclassified; }
};

// ---- metrics -------------------------------------------------------------------

// L_p distance for p in {1, 2, inf}.
inline double lp_distance(const Tensor& a, const Tensor& b, double p) {
    if (a.shape() != b.shape())
        fail("lp_distance: shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
    const auto& x = a.data();
    const auto& y = b.data();
    if (p == 1.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        return s;
    }
    if (p == 2.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - y[i];
            s += d * d;
        }
        return std::sqrt(s);
    }
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            m = std::max(m, std::abs(x[i] - y[i]));
        return m;
    }
    fail("lp_distance: p must be 1, 2 or inf, got ", p);
}

// Plain-value C&W loss: max(max{z_i : i != t} - z_t, -K).
inline double cw_loss_value(const std::vector<double>& logits, int target, double K) {
    check(target >= 0 && target < static_cast<int>(logits.size()),
          "cw_loss: target out of range");
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (static_cast<int>(i) != target) best_other = std::max(best_other, logits[i]);
    return std::max(best_other - logits[static_cast<std::size_t>(target)], -K);
}

// Logit margin of the target class: z_t - max{z_i : i != t}. The attack
// success predicate is margin >= K.
inline double target_margin(const std::vector<double>& logits, int target) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (static_cast<int>(i) != target) best_other = std::max(best_other, logits[i]);
    return logits[static_cast<std::size_t>(target)] - best_other;
}

inline int predicted_class(const Model& model, const Tensor& x) {
    Tensor z = logits_deterministic(model, x);
    return argmax_row(z.data(), 0, static_cast<int>(z.data().size()));
}

// Recomputes logits with an independent deterministic pass and checks the
// margin; used to re-verify candidate examples without trusting optimizer
// state.
inline bool verify_success(const std::vector<const Model*>& models, const Tensor& x,
                           int target, double K) {
    for (const Model* m : models) {
        Tensor z = logits_deterministic(*m, x);
        if (target_margin(z.data(), target) < K) return false;
    }
    return true;
}

// ---- C&W L2 --------------------------------------------------------------------

namespace detail {

// Box constraint via tanh space: pixel = (tanh(w)+1)/2 stays strictly inside
// (0,1) with no clipping anywhere on the optimization path.
inline double atanh_clamped(double pixel) {
    const double eps = 1e-6;
    const double v = std::min(1.0 - eps, std::max(eps, pixel)) * 2.0 - 1.0;
    return std::atanh(v);
}

}  // namespace detail

// Targeted C&W L2 attack against one or more surrogate models jointly (the
// multi-model loss is the sum of the per-model losses). On success the
// returned example re-verifies with margin >= K on every model.
inline AttackOutcome cw_l2_attack(const std::vector<const Model*>& models,
                                  const Tensor& x, int true_label, int target,
                                  const AttackConfig& cfg) {
    cfg.validate();
    check(!models.empty(), "cw_l2_attack: no models given");
    const int classes = models[0]->num_classes();
    for (const Model* m : models) {
        check(m->input_shape == models[0]->input_shape,
              "cw_l2_attack: models disagree on input shape");
        check(m->num_classes() == classes, "cw_l2_attack: models disagree on classes");
    }
    check(target >= 0 && target < classes, "cw_l2_attack: target label out of range");

    AttackOutcome out;
    // Attacks start from instances every surrogate classifies correctly.
    for (const Model* m : models)
        if (predicted_class(*m, x) != true_label) {
            out.status = AttackOutcome::Status::skipped_misclassified;
            return out;
        }

    const std::size_t n_pix = x.data().size();
    double best_l2 = std::numeric_limits<double>::infinity();
    std::vector<double> best_pixels;

    // The unperturbed input is a valid zero-distortion solution whenever it
    // already meets the margin (e.g. target == true label with slack >= K).
    if (verify_success(models, x, target, cfg.confidence)) {
        best_l2 = 0.0;
        best_pixels = x.data();
    }

    std::vector<double> w0(n_pix);
    for (std::size_t i = 0; i < n_pix; ++i)
        w0[i] = detail::atanh_clamped(x.data()[i]);

    double c = cfg.initial_c;
    double c_lo = 0.0, c_hi = std::numeric_limits<double>::infinity();
    Rng eot_rng(derive_seed(cfg.seed, 0x656f74u));

    for (int round = 0; round < cfg.c_rounds; ++round) {
        Tensor w = Tensor::from_data(x.shape(), w0, true);
        auto adam = Optimizer::adam({w}, cfg.adam_lr);
        bool round_success = false;
        double last_probe = std::numeric_limits<double>::infinity();
        const int probe_every = std::max(10, cfg.adam_steps / 10);

        for (int step = 0; step < cfg.adam_steps; ++step) {
            adam.zero_grad();
            Tensor x_adv = add_scalar(mul_scalar(tanh_op(w), 0.5), 0.5);
            Tensor dist = reduce_sum(mul(sub(x_adv, x), sub(x_adv, x)));
            Tensor attack_loss = Tensor::scalar(0.0);
            bool margins_met = true;  // margin >= K on every model, exact
            for (const Model* m : models) {
                if (cfg.eot) {
                    Tensor acc = Tensor::scalar(0.0);
                    for (int k = 0; k < cfg.eot_samples; ++k) {
                        Rng pass_rng(derive_seed(cfg.seed, 0x70617373u,
                                                 static_cast<std::uint64_t>(step),
                                                 static_cast<std::uint64_t>(k)));
                        Tensor z = forward(*m, x_adv, Mode::eval_stochastic, pass_rng);
                        acc = add(acc, cw_margin_loss(z, target, cfg.confidence));
                    }
                    attack_loss = add(attack_loss,
                                      mul_scalar(acc, 1.0 / cfg.eot_samples));
                } else {
                    Rng unused(0);
                    Tensor z = forward(*m, x_adv, Mode::eval_deterministic, unused);
                    if (target_margin(z.data(), target) < cfg.confidence)
                        margins_met = false;
                    attack_loss = add(attack_loss,
                                      cw_margin_loss(z, target, cfg.confidence));
                }
            }
            if (cfg.eot)
                margins_met = verify_success(models, x_adv, target, cfg.confidence);
            Tensor objective = add(dist, mul_scalar(attack_loss, c));
            backward(objective);

            bool finite = true;
            for (double g : w.grad())
                if (!std::isfinite(g)) {
                    finite = false;
                    break;
                }
            if (!finite) break;  // abandon this c round, keep searching

            if (margins_met) {
                const double l2 = std::sqrt(dist.item());
                round_success = true;
                if (l2 < best_l2) {
                    best_l2 = l2;
                    best_pixels = x_adv.data();
                }
            }

            if (cfg.abort_early && step % probe_every == probe_every - 1) {
                const double obj = objective.item();
                if (obj > last_probe * 0.9999) break;
                last_probe = obj;
            }
            adam.step();
        }

        if (round_success) {
            c_hi = c;
            c = (c_lo + c_hi) / 2.0;
        } else {
            c_lo = c;
            c = std::isinf(c_hi) ? c * 10.0 : (c_lo + c_hi) / 2.0;
        }
    }

    if (best_pixels.empty()) {
        out.status = AttackOutcome::Status::failure;
        return out;
    }

    AdversarialExample ex;
    ex.original = x.clone();
    ex.perturbed = Tensor::from_data(x.shape(), std::move(best_pixels));
    ex.true_label = true_label;
    ex.target_label = target;
    ex.confidence = cfg.confidence;
    ex.l2 = lp_distance(ex.original, ex.perturbed, 2.0);
    ex.scheme = models[0]->scheme;

    // Final independent re-verification; optimizer bookkeeping is not trusted.
    if (!verify_success(models, ex.perturbed, target, cfg.confidence)) {
        out.status = AttackOutcome::Status::failure;
        return out;
    }
    for (double v : ex.perturbed.data())
        check(v >= 0.0 && v <= 1.0, "cw_l2_attack: pixel escaped [0,1]");

    out.status = AttackOutcome::Status::success;
    out.example = std::move(ex);
    return out;
}

inline AttackOutcome cw_l2_attack(const Model& model, const Tensor& x, int true_label,
                                  int target, const AttackConfig& cfg) {
    return cw_l2_attack(std::vector<const Model*>{&model}, x, true_label, target, cfg);
}

// ---- FGS -----------------------------------------------------------------------

// Untargeted fast gradient sign step: x' = clip(x + step * sign(dL/dx)).
inline AdversarialExample fgs_attack(const Model& model, const Tensor& x,
                                     int true_label, double step) {
    check(step >= 0.0, "fgs_attack: step must be >= 0");
    Tensor input = x.clone();
    input.set_requires_grad(true);
    Rng unused(0);
    Tensor z = forward(model, input, Mode::eval_deterministic, unused);
    Tensor loss = cross_entropy_with_logits(z, one_hot({true_label},
                                                       model.num_classes()));
    backward(loss);

    std::vector<double> adv(x.data().size());
    const auto& g = input.grad();
    for (std::size_t i = 0; i < adv.size(); ++i) {
        const double sign = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        adv[i] = std::min(1.0, std::max(0.0, x.data()[i] + step * sign));
    }

    AdversarialExample ex;
    ex.original = x.clone();
    ex.perturbed = Tensor::from_data(x.shape(), std::move(adv));
    ex.true_label = true_label;
    ex.target_label = -1;
    ex.l2 = lp_distance(ex.original, ex.perturbed, 2.0);
    ex.scheme = model.scheme;
    return ex;
}

}  // namespace advbench
