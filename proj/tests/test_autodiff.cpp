#include <catch2/catch_amalgamated.hpp>

#include "advbench/model.hpp"
#include "advbench/ops.hpp"
#include "test_helpers.hpp"

using namespace advbench;

TEST_CASE("d/dx sum(x*x) = 2x") {
    Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
    Tensor loss = reduce_sum(mul(x, x));
    backward(loss);
    CHECK(x.grad() == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("cross entropy gradient is softmax minus target") {
    Tensor z = Tensor::from_data({1, 4}, {0.2, -1.0, 0.7, 0.1}, true);
    Tensor y = one_hot({2}, 4);
    backward(cross_entropy_with_logits(z, y));
    const auto p = softmax_vec({0.2, -1.0, 0.7, 0.1});
    for (int j = 0; j < 4; ++j)
        CHECK(z.grad()[static_cast<std::size_t>(j)] ==
              Catch::Approx(p[static_cast<std::size_t>(j)] - (j == 2 ? 1.0 : 0.0))
                  .margin(1e-12));
}

TEST_CASE("gradients accumulate across multiple uses") {
    Tensor x = Tensor::from_data({2}, {3.0, -2.0}, true);
    Tensor loss = reduce_sum(add(mul(x, x), x));  // d/dx = 2x + 1
    backward(loss);
    CHECK(x.grad()[0] == Catch::Approx(7.0));
    CHECK(x.grad()[1] == Catch::Approx(-3.0));
}

TEST_CASE("backward rejects tensors that are not on the graph") {
    Tensor leaf = Tensor::scalar(4.0, true);
    CHECK_THROWS_WITH(backward(leaf), Catch::Matchers::ContainsSubstring("graph"));
    Tensor vec = Tensor::from_data({2}, {1.0, 2.0}, true);
    CHECK_THROWS_WITH(backward(mul(vec, vec)),
                      Catch::Matchers::ContainsSubstring("scalar"));
}

TEST_CASE("maxpool routes gradient to argmax only and conserves it") {
    Tensor x = Tensor::from_data({1, 2, 4, 1}, {1, 2, 5, 1,
                                                3, 4, 0, 0}, true);
    Tensor pooled = maxpool2x2(x);
    Tensor w = Tensor::from_data({2}, {2.0, 7.0});
    backward(reduce_sum(mul(pooled, w.reshaped({1, 1, 2, 1}))));
    // window 1 max at value 4 (flat idx 5), window 2 max at value 5 (flat idx 2)
    std::vector<double> expect = {0, 0, 7, 0, 0, 2, 0, 0};
    CHECK(x.grad() == expect);
    double routed = 0.0;
    for (double g : x.grad()) routed += g;
    CHECK(routed == Catch::Approx(2.0 + 7.0));
}

TEST_CASE("maxpool breaks ties toward the first flat index") {
    Tensor x = Tensor::filled({1, 2, 2, 1}, 1.0, true);
    backward(reduce_sum(maxpool2x2(x)));
    CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

namespace {

// Finite-difference pass over every op with randomized inputs; the oracle is
// testutil::central_diff, never the autodiff path under test.
void check_op_gradients(const char* name, const std::function<Tensor()>& make_loss,
                        std::vector<Tensor> inputs) {
    for (auto& t : inputs) t.zero_grad();
    Tensor loss = make_loss();
    backward(loss);
    auto eval = [&]() { NoGradGuard ng; return make_loss().item(); };
    for (auto& t : inputs) {
        auto r = testutil::gradcheck_tensor(eval, t);
        INFO(name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

}  // namespace

TEST_CASE("gradient check: every differentiable op vs central differences") {
    Rng rng(42);
    auto rand_tensor = [&](Shape s, double lo = -1.0, double hi = 1.0) {
        std::vector<double> d(static_cast<std::size_t>(numel(s)));
        for (auto& v : d) v = rng.uniform(lo, hi);
        return Tensor::from_data(std::move(s), std::move(d), true);
    };

    {
        Tensor a = rand_tensor({3, 4}), b = rand_tensor({3, 4});
        check_op_gradients("add", [&] { return reduce_sum(mul(add(a, b), add(a, b))); },
                           {a, b});
    }
    {
        Tensor a = rand_tensor({2, 5}), b = rand_tensor({2, 5});
        check_op_gradients("sub*mul", [&] { return reduce_sum(mul(sub(a, b), a)); },
                           {a, b});
    }
    {
        Tensor a = rand_tensor({6});
        check_op_gradients("scalar ops", [&] {
            return reduce_sum(mul_scalar(add_scalar(mul(a, a), 0.5), -1.25));
        }, {a});
    }
    {
        Tensor a = rand_tensor({8});
        check_op_gradients("tanh", [&] { return reduce_sum(mul(tanh_op(a), a)); }, {a});
    }
    {
        Tensor a = rand_tensor({5}, 0.5, 2.0);
        check_op_gradients("sqrt", [&] { return sqrt_op(reduce_sum(mul(a, a))); }, {a});
    }
    {
        Tensor a = rand_tensor({7});
        check_op_gradients("relu", [&] { return reduce_sum(mul(relu(a), a)); }, {a});
    }
    {
        Tensor a = rand_tensor({2, 3}), b = rand_tensor({3, 4});
        check_op_gradients("matmul", [&] { return reduce_sum(mul(matmul(a, b), matmul(a, b))); },
                           {a, b});
    }
    {
        Tensor x = rand_tensor({2, 4}), w = rand_tensor({4, 3}), b = rand_tensor({3});
        check_op_gradients("linear", [&] { return reduce_sum(mul(linear(x, w, b), linear(x, w, b))); },
                           {x, w, b});
    }
    {
        Tensor x = rand_tensor({2, 5, 5, 2});
        Tensor k = rand_tensor({3, 3, 2, 3});
        Tensor b = rand_tensor({3});
        for (Padding pad : {Padding::valid, Padding::same}) {
            check_op_gradients("conv2d", [&] {
                Tensor y = conv2d(x, k, b, pad);
                return reduce_sum(mul(y, y));
            }, {x, k, b});
        }
    }
    {
        Tensor x = rand_tensor({1, 4, 4, 2});
        check_op_gradients("maxpool", [&] {
            Tensor y = maxpool2x2(x);
            return reduce_sum(mul(y, y));
        }, {x});
    }
    {
        Tensor z = rand_tensor({3, 5});
        Tensor scale = rand_tensor({3, 5});
        check_op_gradients("softmax", [&] {
            return reduce_sum(mul(softmax_rows(z), scale));
        }, {z});
    }
    {
        Tensor z = rand_tensor({4, 6}, -2.0, 2.0);
        Tensor t = one_hot({1, 0, 5, 3}, 6);
        check_op_gradients("cross_entropy T=1", [&] {
            return cross_entropy_with_logits(z, t);
        }, {z});
        check_op_gradients("cross_entropy T=20", [&] {
            return mul_scalar(cross_entropy_with_logits(z, t, 20.0), 3.0);
        }, {z});
    }
    {
        Tensor z = rand_tensor({1, 6}, -2.0, 2.0);
        check_op_gradients("cw_margin_loss", [&] {
            return mul_scalar(cw_margin_loss(z, 2, 0.5), 2.0);
        }, {z});
    }
    {
        Tensor a = rand_tensor({9});
        check_op_gradients("reduce extremes", [&] {
            return add(reduce_max(mul(a, a)), reduce_min(a));
        }, {a});
        check_op_gradients("reduce mean", [&] { return reduce_mean(mul(a, a)); }, {a});
    }
}

TEST_CASE("random small networks match finite differences") {
    // Small-scale version of the full randomized gradient check. Biases are
    // randomized as well: zero biases can park a ReLU input exactly on its
    // kink (an all-negative conv row feeds a zero dense row), where central
    // differences disagree with any one-sided subgradient.
    Rng rng(9001);
    for (int trial = 0; trial < 3; ++trial) {
        Model m = build_model({LayerSpec::conv2d(2, 3), LayerSpec::relu(),
                               LayerSpec::maxpool(), LayerSpec::dense(6),
                               LayerSpec::relu(), LayerSpec::softmax_head(3)},
                              {6, 6, 1}, derive_seed(11, static_cast<std::uint64_t>(trial)));
        for (auto& p : m.params)
            for (auto& v : p.value.data())
                if (v == 0.0) v = rng.uniform(-0.3, 0.3);
        std::vector<double> img(2 * 6 * 6);
        for (auto& v : img) v = rng.uniform(0.0, 1.0);
        Tensor x = Tensor::from_data({2, 6, 6, 1}, std::move(img), true);
        Tensor targets = one_hot({static_cast<int>(rng.uniform_index(3)),
                                  static_cast<int>(rng.uniform_index(3))}, 3);
        auto loss_fn = [&] {
            Rng unused(0);
            return cross_entropy_with_logits(
                forward(m, x, Mode::eval_deterministic, unused), targets);
        };
        m.zero_grads();
        x.zero_grad();
        backward(loss_fn());
        auto eval = [&] { NoGradGuard ng; return loss_fn().item(); };
        for (auto& p : m.params) {
            auto r = testutil::gradcheck_tensor(eval, p.value);
            CHECK(r.max_rel_err < 1e-4);
        }
        CHECK(testutil::gradcheck_tensor(eval, x).max_rel_err < 1e-4);
    }
}

TEST_CASE("deterministic forward and backward under a fixed seed") {
    auto run = [] {
        Model m = build_model({LayerSpec::conv2d(3, 3), LayerSpec::relu(),
                               LayerSpec::dense(5), LayerSpec::relu(),
                               LayerSpec::softmax_head(4)},
                              {5, 5, 1}, 77);
        Rng data_rng(5);
        std::vector<double> img(25);
        for (auto& v : img) v = data_rng.uniform(0.0, 1.0);
        Tensor x = Tensor::from_data({1, 5, 5, 1}, std::move(img));
        Rng unused(0);
        Tensor loss = cross_entropy_with_logits(
            forward(m, x, Mode::eval_deterministic, unused), one_hot({2}, 4));
        backward(loss);
        Fnv1a h;
        h.update_pod(loss.item());
        for (auto& p : m.params)
            h.update(p.value.grad().data(), p.value.grad().size() * sizeof(double));
        return h.digest();
    };
    CHECK(run() == run());
}
