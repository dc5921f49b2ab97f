#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "advbench/data.hpp"
#include "advbench/model.hpp"

namespace advbench {

// How a trained model turns an input into a label. voting/mc_avg run the
// network stochastically n times (Dropout and/or Random Spiking live);
// region_based votes over uniformly noised copies of the input.
struct DecisionProcedure {
    enum class Kind { single, voting, mc_avg, region_based };
    Kind kind = Kind::single;
    int n = 10;                 // stochastic passes for voting / mc_avg
    int region_votes = 200;     // rounds for region_based
    double region_noise = 0.4;  // per-pixel Uniform(-r, r)

    static DecisionProcedure single() { return {}; }
    static DecisionProcedure voting(int n = 10) {
        DecisionProcedure p;
        p.kind = Kind::voting;
        p.n = n;
        return p;
    }
    static DecisionProcedure mc_avg(int n = 10) {
        DecisionProcedure p;
        p.kind = Kind::mc_avg;
        p.n = n;
        return p;
    }
    static DecisionProcedure region_based(int votes, double r) {
        DecisionProcedure p;
        p.kind = Kind::region_based;
        p.region_votes = votes;
        p.region_noise = r;
        return p;
    }

    void validate() const {
        check(n >= 1, "decision procedure: n must be >= 1");
        check(region_votes >= 1, "decision procedure: region votes must be >= 1");
        check(region_noise >= 0.0, "decision procedure: noise bound must be >= 0");
    }
};

struct Prediction {
    int label = -1;
    std::vector<double> probabilities;  // averaged softmax (vote shares for RC)
};

namespace detail {

// Majority vote; ties resolve to the smaller label index.
inline int majority_label(const std::vector<int>& votes, int classes) {
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int v : votes) counts[static_cast<std::size_t>(v)]++;
    int best = 0;
    for (int c = 1; c < classes; ++c)
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)])
            best = c;
    return best;
}

inline std::vector<double> softmax_of_logits_row(const Tensor& z) {
    return softmax_vec(z.data());
}

}  // namespace detail

inline int region_based_predict(const Model& model, const Tensor& x, int t_votes,
                                double r, Rng& rng);

// Single prediction of one [1,H,W,C] image under the given procedure.
// Stochastic passes use streams derived from (rng draw, pass index), so the
// reduction is order-independent.
inline Prediction predict(const Model& model, const Tensor& x,
                          const DecisionProcedure& proc, Rng& rng) {
    proc.validate();
    const int classes = model.num_classes();
    Prediction out;
    switch (proc.kind) {
        case DecisionProcedure::Kind::single: {
            Tensor z = logits_deterministic(model, x);
            out.probabilities = detail::softmax_of_logits_row(z);
            out.label = argmax_row(out.probabilities, 0, classes);
            return out;
        }
        case DecisionProcedure::Kind::voting:
        case DecisionProcedure::Kind::mc_avg: {
            const std::uint64_t base = rng.next_u64();
            std::vector<double> mean_probs(static_cast<std::size_t>(classes), 0.0);
            std::vector<int> votes;
            votes.reserve(static_cast<std::size_t>(proc.n));
            NoGradGuard ng;
            for (int pass = 0; pass < proc.n; ++pass) {
                Rng pass_rng(derive_seed(base, static_cast<std::uint64_t>(pass)));
                Tensor z = forward(model, x, Mode::eval_stochastic, pass_rng);
                const auto p = detail::softmax_of_logits_row(z);
                for (int c = 0; c < classes; ++c)
                    mean_probs[static_cast<std::size_t>(c)] +=
                        p[static_cast<std::size_t>(c)] / proc.n;
                votes.push_back(argmax_row(p, 0, classes));
            }
            out.probabilities = std::move(mean_probs);
            out.label = proc.kind == DecisionProcedure::Kind::voting
                            ? detail::majority_label(votes, classes)
                            : argmax_row(out.probabilities, 0, classes);
            return out;
        }
        case DecisionProcedure::Kind::region_based: {
            const std::uint64_t base = rng.next_u64();
            std::vector<int> votes(static_cast<std::size_t>(proc.region_votes));
            NoGradGuard ng;
            for (int round = 0; round < proc.region_votes; ++round) {
                Rng round_rng(derive_seed(base, static_cast<std::uint64_t>(round)));
                std::vector<double> noisy(x.data().size());
                for (std::size_t i = 0; i < noisy.size(); ++i) {
                    const double v =
                        x.data()[i] +
                        round_rng.uniform(-proc.region_noise, proc.region_noise);
                    noisy[i] = std::min(1.0, std::max(0.0, v));
                }
                Tensor z = logits_deterministic(
                    model, Tensor::from_data(x.shape(), std::move(noisy)));
                votes[static_cast<std::size_t>(round)] =
                    argmax_row(z.data(), 0, classes);
            }
            out.label = detail::majority_label(votes, classes);
            out.probabilities.assign(static_cast<std::size_t>(classes), 0.0);
            for (int v : votes)
                out.probabilities[static_cast<std::size_t>(v)] +=
                    1.0 / proc.region_votes;  // vote shares
            return out;
        }
    }
    fail("predict: unknown decision procedure");
}

// Region-based classification: majority vote over t uniformly noised,
// clipped copies of the input, each classified deterministically.
inline int region_based_predict(const Model& model, const Tensor& x, int t_votes,
                                double r, Rng& rng) {
    return predict(model, x, DecisionProcedure::region_based(t_votes, r), rng).label;
}

// Monte Carlo check of the ensemble loss bound: returns (mean over n passes
// of CE(y, p_i), CE(y, mean of p_i)). Jensen puts the first above the second.
inline std::pair<double, double> jensen_gap(const Model& model, const Tensor& x, int y,
                                            int n, Rng& rng) {
    check(n >= 1, "jensen_gap: n must be >= 1");
    const int classes = model.num_classes();
    check(y >= 0 && y < classes, "jensen_gap: label out of range");
    const std::uint64_t base = rng.next_u64();
    std::vector<double> mean_probs(static_cast<std::size_t>(classes), 0.0);
    double mean_loss = 0.0;
    NoGradGuard ng;
    for (int pass = 0; pass < n; ++pass) {
        Rng pass_rng(derive_seed(base, static_cast<std::uint64_t>(pass)));
        Tensor z = forward(model, x, Mode::eval_stochastic, pass_rng);
        const auto p = detail::softmax_of_logits_row(z);
        mean_loss -= std::log(p[static_cast<std::size_t>(y)]) / n;
        for (int c = 0; c < classes; ++c)
            mean_probs[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)] / n;
    }
    const double loss_of_mean = -std::log(mean_probs[static_cast<std::size_t>(y)]);
    return {mean_loss, loss_of_mean};
}

// Classification error over a dataset. The deterministic single procedure
// runs batched; stochastic procedures go image by image with derived seeds.
inline double evaluate_error(const Model& model, const Dataset& ds,
                             const DecisionProcedure& proc = DecisionProcedure::single(),
                             std::uint64_t seed = 0, int batch = 256) {
    check(ds.size() > 0, "evaluate_error: empty dataset");
    std::size_t wrong = 0;
    if (proc.kind == DecisionProcedure::Kind::single) {
        NoGradGuard ng;
        for (std::size_t at = 0; at < ds.size(); at += static_cast<std::size_t>(batch)) {
            std::vector<std::size_t> idx;
            for (std::size_t i = at; i < std::min(ds.size(), at + static_cast<std::size_t>(batch)); ++i)
                idx.push_back(i);
            Tensor z = logits_deterministic(model, ds.batch(idx));
            const int classes = model.num_classes();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const int label = argmax_row(
                    z.data(), i * static_cast<std::size_t>(classes), classes);
                if (label != ds.labels[idx[i]]) ++wrong;
            }
        }
    } else {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            Rng rng(derive_seed(seed, 0x6576616cu, static_cast<std::uint64_t>(i)));
            if (predict(model, ds.image(i), proc, rng).label != ds.labels[i]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

}  // namespace advbench
