#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "advbench/tensor.hpp"

namespace advbench {

// SGD with momentum (training, Table-8 style) and Adam (attack optimization).
// Slots are bound positionally to the parameter list handed to the
// constructor; every parameter must carry a populated gradient when step()
// runs.
class Optimizer {
public:
    enum class Kind { sgd_momentum, adam };

    struct Hyper {
        double lr = 0.01;
        double momentum = 0.9;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Optimizer(Kind kind, std::vector<Tensor> params, Hyper hyper)
        : kind_(kind), params_(std::move(params)), hyper_(hyper) {
        slots_a_.resize(params_.size());
        slots_b_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            slots_a_[i].assign(params_[i].data().size(), 0.0);
            if (kind_ == Kind::adam) slots_b_[i].assign(params_[i].data().size(), 0.0);
        }
    }

    static Optimizer sgd_momentum(std::vector<Tensor> params, double lr,
                                  double momentum = 0.9) {
        Hyper h;
        h.lr = lr;
        h.momentum = momentum;
        return Optimizer(Kind::sgd_momentum, std::move(params), h);
    }

    static Optimizer adam(std::vector<Tensor> params, double lr,
                          double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8) {
        Hyper h;
        h.lr = lr;
        h.beta1 = beta1;
        h.beta2 = beta2;
        h.epsilon = epsilon;
        return Optimizer(Kind::adam, std::move(params), h);
    }

    std::int64_t step_count() const { return step_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        ++step_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = params_[i];
            if (!p.has_grad())
                fail("optimizer: parameter ", i, " has no gradient");
            auto& w = p.data();
            const auto& g = p.grad();
            if (kind_ == Kind::sgd_momentum) {
                auto& v = slots_a_[i];
                for (std::size_t j = 0; j < w.size(); ++j) {
                    v[j] = hyper_.momentum * v[j] + g[j];
                    w[j] -= hyper_.lr * v[j];
                }
            } else {
                auto& m = slots_a_[i];
                auto& v = slots_b_[i];
                const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
                const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
                for (std::size_t j = 0; j < w.size(); ++j) {
                    m[j] = hyper_.beta1 * m[j] + (1.0 - hyper_.beta1) * g[j];
                    v[j] = hyper_.beta2 * v[j] + (1.0 - hyper_.beta2) * g[j] * g[j];
                    const double mhat = m[j] / c1;
                    const double vhat = v[j] / c2;
                    w[j] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.epsilon);
                }
            }
        }
    }

private:
    Kind kind_;
    std::vector<Tensor> params_;
    Hyper hyper_;
    std::int64_t step_ = 0;
    std::vector<std::vector<double>> slots_a_;  // velocity / first moment
    std::vector<std::vector<double>> slots_b_;  // second moment (adam)
};

}  // namespace advbench
