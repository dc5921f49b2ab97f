#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "advbench/attacks.hpp"
#include "advbench/inference.hpp"
#include "advbench/optim.hpp"
#include "advbench/threadpool.hpp"

namespace advbench {

// Adversarial-augmentation settings for the *-adv schemes: generate
// candidates against a trained base-scheme target, sort by L2 ascending,
// keep the first `keep_quota` below the cutoff, append under original labels.
struct AugmentConfig {
    int generate_count = 1200;
    int keep_quota = 1000;
    double l2_cutoff = 3.0;
    std::vector<double> confidences = {0.0, 5.0, 10.0, 15.0};
    AttackConfig attack;
    unsigned threads = 1;
};

struct TrainConfig {
    std::string scheme = "standard";
    int epochs = 10;
    int batch_size = 128;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double dropout_rate = 0.5;
    double rs_keep_prob = 0.8;
    double distill_temperature = 100.0;
    std::uint64_t seed = 0;
    // architecture scale: desk default is one conv block; paper_arch selects
    // the full two-block stack
    int conv_channels = 8;
    int dense_units = 64;
    bool paper_arch = false;
    // stop once the per-epoch test error reaches this level (0 = never)
    double early_stop_test_error = 0.0;
    AugmentConfig augment;

    void validate() const {
        check(epochs >= 0, "train: epochs must be >= 0");
        check(batch_size > 0, "train: batch size must be positive");
        check(learning_rate > 0.0, "train: learning rate must be positive");
        check(rs_keep_prob > 0.0 && rs_keep_prob <= 1.0,
              "train: rs keep probability must be in (0,1]");
        check(dropout_rate >= 0.0 && dropout_rate < 1.0,
              "train: dropout rate must be in [0,1)");
    }
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double test_error = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> log;
    std::vector<std::string> warnings;
};

inline bool scheme_has_dropout(const std::string& scheme) {
    return scheme == "dropout" || scheme == "rsd1" || scheme == "distillation" ||
           scheme == "dropout-adv";
}
inline bool scheme_has_random_spiking(const std::string& scheme) {
    return scheme == "rs1" || scheme == "rsd1" || scheme == "rs1-adv";
}
inline bool scheme_is_adversarial(const std::string& scheme) {
    return scheme == "dropout-adv" || scheme == "rs1-adv";
}

inline bool scheme_known(const std::string& scheme) {
    return scheme == "standard" || scheme == "dropout" || scheme == "rs1" ||
           scheme == "rsd1" || scheme == "distillation" || scheme == "dropout-adv" ||
           scheme == "rs1-adv";
}

// The decision procedure each scheme reports under (Single for the plain
// model, MC averaging for stochastic schemes).
inline DecisionProcedure scheme_decision_procedure(const std::string& scheme, int n = 10) {
    if (scheme_has_dropout(scheme) || scheme_has_random_spiking(scheme))
        return DecisionProcedure::mc_avg(n);
    return DecisionProcedure::single();
}

// Layer stack for a scheme. The Random Spiking filter sits right after the
// first convolution's ReLU, before pooling; dropout follows each dense ReLU.
inline std::vector<LayerSpec> scheme_layers(const TrainConfig& cfg) {
    check(scheme_known(cfg.scheme), format_msg("unknown scheme id '", cfg.scheme, "'"));
    const bool rs = scheme_has_random_spiking(cfg.scheme);
    const bool dropout = scheme_has_dropout(cfg.scheme);
    std::vector<LayerSpec> l;
    auto dense_block = [&](int units) {
        l.push_back(LayerSpec::dense(units));
        l.push_back(LayerSpec::relu());
        if (dropout) l.push_back(LayerSpec::dropout(cfg.dropout_rate));
    };
    if (cfg.paper_arch) {
        l.push_back(LayerSpec::conv2d(32, 3));
        l.push_back(LayerSpec::relu());
        if (rs) l.push_back(LayerSpec::random_spiking(cfg.rs_keep_prob));
        l.push_back(LayerSpec::conv2d(32, 3));
        l.push_back(LayerSpec::relu());
        l.push_back(LayerSpec::maxpool());
        l.push_back(LayerSpec::conv2d(64, 3));
        l.push_back(LayerSpec::relu());
        l.push_back(LayerSpec::conv2d(64, 3));
        l.push_back(LayerSpec::relu());
        l.push_back(LayerSpec::maxpool());
        dense_block(200);
        dense_block(200);
    } else {
        l.push_back(LayerSpec::conv2d(cfg.conv_channels, 3));
        l.push_back(LayerSpec::relu());
        if (rs) l.push_back(LayerSpec::random_spiking(cfg.rs_keep_prob));
        l.push_back(LayerSpec::maxpool());
        dense_block(cfg.dense_units);
    }
    l.push_back(LayerSpec::softmax_head(10));
    return l;
}

inline Model build_scheme_model(const TrainConfig& cfg, Shape input_shape) {
    Model m = build_model(scheme_layers(cfg), input_shape, cfg.seed);
    m.scheme = cfg.scheme;
    return m;
}

namespace detail {

// One SGD pass over the dataset; targets may be one-hot or soft labels.
// Gradient scale under temperature is restored by multiplying the loss by T
// (softmax-at-T gradients shrink by 1/T, which would starve short desk-scale
// runs).
inline TrainResult run_sgd(Model model, const Dataset& train, const Tensor& targets,
                           const Dataset& test, const TrainConfig& cfg,
                           double temperature) {
    cfg.validate();
    check(train.size() > 0, "train: empty dataset");
    model.set_params_requires_grad(true);
    auto opt = Optimizer::sgd_momentum(model.param_tensors(), cfg.learning_rate,
                                       cfg.momentum);
    TrainResult result;
    const int classes = model.num_classes();
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x65706f63u,
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size();
             at += static_cast<std::size_t>(cfg.batch_size), ++batches) {
            const std::size_t end =
                std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(at),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            Tensor xb = train.batch(idx);
            std::vector<double> t(idx.size() * static_cast<std::size_t>(classes));
            for (std::size_t i = 0; i < idx.size(); ++i)
                std::copy_n(targets.data().begin() +
                                static_cast<std::ptrdiff_t>(idx[i] * static_cast<std::size_t>(classes)),
                            classes,
                            t.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(classes)));
            Tensor tb = Tensor::from_data({static_cast<int>(idx.size()), classes},
                                          std::move(t));
            Rng fwd_rng(derive_seed(cfg.seed, 0x66776421u,
                                    static_cast<std::uint64_t>(epoch), batches));
            opt.zero_grad();
            Tensor z = forward(model, xb, Mode::train, fwd_rng);
            Tensor loss = cross_entropy_with_logits(z, tb, temperature);
            if (temperature != 1.0) loss = mul_scalar(loss, temperature);
            const double loss_v = loss.item();
            if (!std::isfinite(loss_v))
                fail("training diverged (loss not finite) at epoch ", epoch, " batch ",
                     batches);
            backward(loss);
            opt.step();
            loss_sum += loss_v;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(batches);
        m.test_error = evaluate_error(model, test);
        result.log.push_back(m);
        if (cfg.early_stop_test_error > 0.0 &&
            m.test_error <= cfg.early_stop_test_error)
            break;
    }
    model.freeze_params();
    result.model = std::move(model);
    return result;
}

}  // namespace detail

// Standard supervised training of one scheme model on hard labels.
inline TrainResult train(Model model, const Dataset& train_ds, const Dataset& test_ds,
                         const TrainConfig& cfg) {
    Tensor targets = one_hot(train_ds.labels, model.num_classes());
    return detail::run_sgd(std::move(model), train_ds, targets, test_ds, cfg, 1.0);
}

// Defensive distillation: teacher of the same architecture trained at
// temperature T on hard labels, soft labels taken from the teacher at T in a
// single deterministic pass, student trained at T on those labels. Evaluation
// everywhere afterwards runs at T=1 (plain logits).
inline TrainResult train_distillation(const Dataset& train_ds, const Dataset& test_ds,
                                      const TrainConfig& cfg) {
    check(cfg.distill_temperature > 0.0,
          "distillation: temperature must be positive");
    TrainConfig teacher_cfg = cfg;
    teacher_cfg.seed = derive_seed(cfg.seed, 0x74656163u);
    Model teacher = build_scheme_model(teacher_cfg, train_ds.image_shape());
    TrainResult teacher_run =
        detail::run_sgd(std::move(teacher), train_ds, one_hot(train_ds.labels, 10),
                        test_ds, teacher_cfg, cfg.distill_temperature);

    // Soft labels: one full deterministic pass of teacher probabilities at T.
    const int classes = teacher_run.model.num_classes();
    std::vector<double> soft(train_ds.size() * static_cast<std::size_t>(classes));
    {
        NoGradGuard ng;
        const int chunk = 256;
        for (std::size_t at = 0; at < train_ds.size(); at += chunk) {
            std::vector<std::size_t> idx;
            for (std::size_t i = at; i < std::min(train_ds.size(), at + chunk); ++i)
                idx.push_back(i);
            Tensor z = logits_deterministic(teacher_run.model, train_ds.batch(idx));
            for (std::size_t i = 0; i < idx.size(); ++i) {
                std::vector<double> row(static_cast<std::size_t>(classes));
                for (int c = 0; c < classes; ++c)
                    row[static_cast<std::size_t>(c)] =
                        z.data()[i * static_cast<std::size_t>(classes) +
                                 static_cast<std::size_t>(c)] /
                        cfg.distill_temperature;
                const auto p = softmax_vec(row);
                std::copy(p.begin(), p.end(),
                          soft.begin() + static_cast<std::ptrdiff_t>(
                                             idx[i] * static_cast<std::size_t>(classes)));
            }
        }
    }
    Model student = build_scheme_model(cfg, train_ds.image_shape());
    TrainResult out = detail::run_sgd(
        std::move(student), train_ds,
        Tensor::from_data({static_cast<int>(train_ds.size()), classes}, std::move(soft)),
        test_ds, cfg, cfg.distill_temperature);
    return out;
}

struct AugmentStats {
    int generated = 0;
    int attack_failures = 0;
    int kept = 0;
    bool failure_warning = false;
    std::vector<double> kept_l2;  // ascending, all below the cutoff
};

// Candidate adversarial examples from randomly sampled training instances and
// random target labels, sorted by L2 ascending; the first `keep_quota` below
// the cutoff are appended to the dataset labeled with their original labels.
inline Dataset adversarial_augment(const Model& target_model, const Dataset& train_ds,
                                   const AugmentConfig& aug, std::uint64_t seed,
                                   AugmentStats* stats_out = nullptr,
                                   std::vector<std::string>* warnings = nullptr) {
    check(aug.generate_count >= 0 && aug.keep_quota >= 0,
          "augment: counts must be >= 0");
    AugmentStats stats;
    stats.generated = aug.generate_count;
    if (aug.generate_count == 0 || aug.keep_quota == 0) {
        if (stats_out) *stats_out = stats;
        return train_ds;  // quota 0: dataset unchanged
    }

    struct Candidate {
        double l2;
        std::size_t source;
        std::vector<double> pixels;
    };
    std::vector<std::optional<Candidate>> slots(
        static_cast<std::size_t>(aug.generate_count));

    parallel_for(static_cast<std::size_t>(aug.generate_count), aug.threads,
                 [&](std::size_t i) {
                     Rng rng(derive_seed(seed, 0x61756721u, i));
                     const std::size_t src = rng.uniform_index(train_ds.size());
                     const int y = train_ds.labels[src];
                     int t = static_cast<int>(rng.uniform_index(10));
                     while (t == y) t = static_cast<int>(rng.uniform_index(10));
                     AttackConfig atk = aug.attack;
                     atk.confidence = aug.confidences[i % aug.confidences.size()];
                     atk.l2_cutoff = aug.l2_cutoff;
                     atk.seed = derive_seed(seed, 0x61747321u, i);
                     auto outcome =
                         cw_l2_attack(target_model, train_ds.image(src), y, t, atk);
                     if (outcome.ok())
                         slots[i] = Candidate{outcome.example->l2, src,
                                              outcome.example->perturbed.data()};
                 });

    std::vector<Candidate> candidates;
    for (auto& s : slots)
        if (s) candidates.push_back(std::move(*s));
    stats.attack_failures = aug.generate_count - static_cast<int>(candidates.size());
    if (stats.attack_failures * 2 > aug.generate_count) {
        stats.failure_warning = true;
        if (warnings)
            warnings->push_back(format_msg("adversarial_augment: attack failure rate ",
                                           stats.attack_failures, "/",
                                           aug.generate_count, " exceeds 50%"));
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.l2 < b.l2; });

    std::vector<double> pixels = train_ds.images.data();
    std::vector<int> labels = train_ds.labels;
    int kept = 0;
    for (const auto& c : candidates) {
        if (kept >= aug.keep_quota) break;
        if (c.l2 >= aug.l2_cutoff) break;  // sorted: everything after is larger
        pixels.insert(pixels.end(), c.pixels.begin(), c.pixels.end());
        labels.push_back(train_ds.labels[c.source]);  // original label
        stats.kept_l2.push_back(c.l2);
        ++kept;
    }
    stats.kept = kept;
    if (stats_out) *stats_out = stats;

    Dataset out;
    Shape s = train_ds.images.shape();
    s[0] = static_cast<int>(labels.size());
    out.images = Tensor::from_data(std::move(s), std::move(pixels));
    out.labels = std::move(labels);
    out.split_tag = train_ds.split_tag + "+adv";
    out.num_classes = train_ds.num_classes;
    return out;
}

// Full per-scheme pipeline: plain training, distillation, or adversarial
// augmentation against a freshly trained base-scheme target followed by
// training on the augmented data.
inline TrainResult train_scheme(const Dataset& train_ds, const Dataset& test_ds,
                                const TrainConfig& cfg) {
    check(scheme_known(cfg.scheme), format_msg("unknown scheme id '", cfg.scheme, "'"));
    if (cfg.scheme == "distillation") return train_distillation(train_ds, test_ds, cfg);
    if (!scheme_is_adversarial(cfg.scheme))
        return detail::run_sgd(build_scheme_model(cfg, train_ds.image_shape()), train_ds,
                               one_hot(train_ds.labels, 10), test_ds, cfg, 1.0);

    // *-adv: train the base scheme, attack it, retrain on augmented data.
    TrainConfig base_cfg = cfg;
    base_cfg.scheme = cfg.scheme == "dropout-adv" ? "dropout" : "rs1";
    base_cfg.seed = derive_seed(cfg.seed, 0x62617365u);
    TrainResult base = detail::run_sgd(build_scheme_model(base_cfg, train_ds.image_shape()),
                                       train_ds, one_hot(train_ds.labels, 10), test_ds,
                                       base_cfg, 1.0);
    TrainResult out;
    AugmentStats stats;
    Dataset augmented = adversarial_augment(base.model, train_ds, cfg.augment,
                                            derive_seed(cfg.seed, 0x61647621u), &stats,
                                            &out.warnings);
    TrainResult final_run =
        detail::run_sgd(build_scheme_model(cfg, train_ds.image_shape()), augmented,
                        one_hot(augmented.labels, 10), test_ds, cfg, 1.0);
    out.model = std::move(final_run.model);
    out.log = std::move(final_run.log);
    return out;
}

// JSONL metrics log, one record per epoch.
inline std::string metrics_to_jsonl(const std::vector<EpochMetrics>& log) {
    std::string out;
    for (const auto& m : log)
        out += format_msg("{\"epoch\":", m.epoch, ",\"train_loss\":", m.train_loss,
                          ",\"test_error\":", m.test_error, "}\n");
    return out;
}

}  // namespace advbench
