#include <catch2/catch_amalgamated.hpp>

#include "advbench/ops.hpp"
#include "advbench/rng.hpp"

using namespace advbench;

TEST_CASE("relu clamps negatives") {
    Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
    Tensor y = relu(x);
    CHECK(y.data() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("softmax of equal logits is uniform") {
    Tensor z = Tensor::from_data({1, 3}, {0.0, 0.0, 0.0});
    Tensor p = softmax_rows(z);
    for (double v : p.data()) CHECK(v == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    Rng rng(7);
    std::vector<double> data(40);
    for (auto& v : data) v = rng.uniform(-30.0, 30.0);
    Tensor p = softmax_rows(Tensor::from_data({8, 5}, std::move(data)));
    for (int b = 0; b < 8; ++b) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) {
            const double v = p.data()[static_cast<std::size_t>(b) * 5 + j];
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("conv2d matches hand-computed convolution") {
    // 3x3 ones against a 2x2 ones kernel, valid padding: every window sums 4.
    Tensor x = Tensor::filled({1, 3, 3, 1}, 1.0);
    Tensor k = Tensor::filled({2, 2, 1, 1}, 1.0);
    Tensor b = Tensor::zeros({1});
    Tensor y = conv2d(x, k, b, Padding::valid);
    REQUIRE(y.shape() == Shape{1, 2, 2, 1});
    for (double v : y.data()) CHECK(v == Catch::Approx(4.0));
}

TEST_CASE("conv2d hand oracle on an asymmetric input") {
    // Oracle computed by direct summation over the window definition.
    std::vector<double> img = {1, 2, 3,
                               4, 5, 6,
                               7, 8, 9};
    std::vector<double> ker = {1, 0,
                               0, -1};
    auto oracle = [&](int oy, int ox) {
        double s = 0.0;
        for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx)
                s += img[static_cast<std::size_t>((oy + ky) * 3 + ox + kx)] *
                     ker[static_cast<std::size_t>(ky * 2 + kx)];
        return s;
    };
    Tensor x = Tensor::from_data({1, 3, 3, 1}, std::vector<double>(img));
    Tensor k = Tensor::from_data({2, 2, 1, 1}, std::vector<double>(ker));
    Tensor y = conv2d(x, k, Tensor::zeros({1}), Padding::valid);
    for (int oy = 0; oy < 2; ++oy)
        for (int ox = 0; ox < 2; ++ox)
            CHECK(y.data()[static_cast<std::size_t>(oy * 2 + ox)] ==
                  Catch::Approx(oracle(oy, ox)));
}

TEST_CASE("conv2d same padding preserves spatial size") {
    Tensor x = Tensor::filled({2, 5, 5, 3}, 0.5);
    Tensor k = Tensor::filled({3, 3, 3, 4}, 0.1);
    Tensor y = conv2d(x, k, Tensor::zeros({4}), Padding::same);
    CHECK(y.shape() == Shape{2, 5, 5, 4});
}

TEST_CASE("conv2d rejects mismatched channel counts") {
    Tensor x = Tensor::filled({1, 4, 4, 2}, 1.0);
    Tensor k = Tensor::filled({3, 3, 3, 4}, 1.0);
    CHECK_THROWS_WITH(conv2d(x, k, Tensor::zeros({4})),
                      Catch::Matchers::ContainsSubstring("conv2d") &&
                          Catch::Matchers::ContainsSubstring("[1x4x4x2]") &&
                          Catch::Matchers::ContainsSubstring("[3x3x3x4]"));
}

TEST_CASE("elementwise ops report both shapes on mismatch") {
    Tensor a = Tensor::zeros({2, 2});
    Tensor b = Tensor::zeros({4});
    CHECK_THROWS_WITH(add(a, b), Catch::Matchers::ContainsSubstring("add") &&
                                     Catch::Matchers::ContainsSubstring("[2x2]") &&
                                     Catch::Matchers::ContainsSubstring("[4]"));
}

TEST_CASE("maxpool takes window maxima") {
    Tensor x = Tensor::from_data({1, 4, 4, 1},
                                 {1, 2, 5, 1,
                                  3, 4, 0, 0,
                                  9, 9, 2, 2,
                                  9, 9, 2, 3});
    Tensor y = maxpool2x2(x);
    CHECK(y.data() == std::vector<double>{4, 5, 9, 3});
}

TEST_CASE("lp-style reductions") {
    Tensor x = Tensor::from_data({4}, {3.0, -1.0, 2.0, -7.0});
    CHECK(reduce_max(x).item() == 3.0);
    CHECK(reduce_min(x).item() == -7.0);
    CHECK(reduce_sum(x).item() == Catch::Approx(-3.0));
    CHECK(reduce_mean(x).item() == Catch::Approx(-0.75));
}

TEST_CASE("cw margin loss formula") {
    Tensor z = Tensor::from_data({3}, {1.0, 3.0, 2.0});
    CHECK(cw_margin_loss(z, 0, 0.0).item() == Catch::Approx(2.0));
    CHECK(cw_margin_loss(z, 1, 0.0).item() == Catch::Approx(0.0));
    CHECK(cw_margin_loss(z, 1, 5.0).item() == Catch::Approx(-1.0));
}

TEST_CASE("matmul against hand-multiplied 2x2") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.data() == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("cross entropy degenerates to -log p for one-hot targets") {
    Tensor z = Tensor::from_data({1, 3}, {0.5, 1.5, -0.25});
    Tensor t = one_hot({1}, 3);
    const auto p = softmax_vec({0.5, 1.5, -0.25});
    CHECK(cross_entropy_with_logits(z, t).item() ==
          Catch::Approx(-std::log(p[1])).epsilon(1e-12));
}

TEST_CASE("temperature flattens soft labels") {
    // At higher T the softmax entropy strictly increases for non-uniform logits.
    std::vector<double> logits = {2.0, 0.5, -1.0, 0.0};
    auto entropy_at = [&](double T) {
        std::vector<double> scaled = logits;
        for (auto& v : scaled) v /= T;
        const auto p = softmax_vec(scaled);
        double h = 0.0;
        for (double v : p) h -= v * std::log(v);
        return h;
    };
    CHECK(entropy_at(100.0) > entropy_at(1.0));
}
