#include <catch2/catch_amalgamated.hpp>

#include "advbench/optim.hpp"
#include "advbench/ops.hpp"

using namespace advbench;

namespace {

Tensor param_with_grad(std::vector<double> w, std::vector<double> g) {
    const int n = static_cast<int>(w.size());
    Tensor t = Tensor::from_data({n}, std::move(w), true);
    t.grad() = std::move(g);
    return t;
}

}  // namespace

TEST_CASE("plain sgd single step") {
    Tensor w = param_with_grad({1.0}, {2.0});
    auto opt = Optimizer::sgd_momentum({w}, 0.1, 0.0);
    opt.step();
    CHECK(w.data()[0] == Catch::Approx(0.8));
}

TEST_CASE("sgd momentum two-step oracle") {
    // Hand-rolled: v1 = 0.9*0 + 1 = 1, w1 = 0 - 1 = -1;
    //              v2 = 0.9*1 + 1 = 1.9, w2 = -1 - 1.9 = -2.9.
    Tensor w = param_with_grad({0.0}, {1.0});
    auto opt = Optimizer::sgd_momentum({w}, 1.0, 0.9);
    opt.step();
    CHECK(w.data()[0] == Catch::Approx(-1.0));
    w.grad()[0] = 1.0;
    opt.step();
    CHECK(w.data()[0] == Catch::Approx(-2.9));
    CHECK(opt.step_count() == 2);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    Tensor w = param_with_grad({0.3, -4.0, 2.5}, {0.0, 0.0, 0.0});
    auto opt = Optimizer::adam({w}, 0.1);
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(w.data() == std::vector<double>{0.3, -4.0, 2.5});
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
    // With bias correction the very first Adam step is lr * g/(|g| + eps').
    Tensor w = param_with_grad({1.0, 1.0}, {0.5, -3.0});
    auto opt = Optimizer::adam({w}, 0.01);
    opt.step();
    CHECK(w.data()[0] == Catch::Approx(1.0 - 0.01).epsilon(1e-4));
    CHECK(w.data()[1] == Catch::Approx(1.0 + 0.01).epsilon(1e-4));
}

TEST_CASE("adam two-step hand oracle") {
    // beta1=0.9, beta2=0.999, eps=1e-8, lr=0.1, g=2 both steps, w0=1.
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1, g = 2.0;
    double m = 0, v = 0, w = 1.0;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        w -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    Tensor p = param_with_grad({1.0}, {2.0});
    auto opt = Optimizer::adam({p}, lr);
    opt.step();
    p.grad()[0] = 2.0;
    opt.step();
    CHECK(p.data()[0] == Catch::Approx(w).epsilon(1e-12));
}

TEST_CASE("missing gradient is an error") {
    Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
    auto opt = Optimizer::sgd_momentum({w}, 0.1);
    CHECK_THROWS_WITH(opt.step(), Catch::Matchers::ContainsSubstring("gradient"));
}

TEST_CASE("optimizer drives a quadratic to its minimum") {
    Tensor w = Tensor::from_data({2}, {5.0, -3.0}, true);
    auto opt = Optimizer::adam({w}, 0.05);
    for (int i = 0; i < 400; ++i) {
        opt.zero_grad();
        Tensor target = Tensor::from_data({2}, {1.0, 2.0});
        backward(reduce_sum(mul(sub(w, target), sub(w, target))));
        opt.step();
    }
    CHECK(w.data()[0] == Catch::Approx(1.0).margin(1e-3));
    CHECK(w.data()[1] == Catch::Approx(2.0).margin(1e-3));
}
