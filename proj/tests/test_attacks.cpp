#include <catch2/catch_amalgamated.hpp>

#include "advbench/train.hpp"

using namespace advbench;

namespace {

const Dataset& train_set() {
    static Dataset ds = make_synthetic_digits(4000, 100, "train");
    return ds;
}
const Dataset& test_set() {
    static Dataset ds = make_synthetic_digits(400, 200, "test");
    return ds;
}

const Model& desk_model() {
    static Model m = [] {
        TrainConfig cfg;
        cfg.scheme = "standard";
        cfg.epochs = 4;
        cfg.seed = 7;
        return train_scheme(train_set(), test_set(), cfg).model;
    }();
    return m;
}

AttackConfig quick_attack(double K = 0.0) {
    AttackConfig cfg;
    cfg.confidence = K;
    cfg.adam_steps = 200;
    cfg.c_rounds = 4;
    return cfg;
}

}  // namespace

TEST_CASE("lp distances") {
    Tensor a = Tensor::from_data({2}, {0.0, 0.0});
    Tensor b = Tensor::from_data({2}, {3.0, 4.0});
    CHECK(lp_distance(a, b, 2.0) == Catch::Approx(5.0));
    CHECK(lp_distance(a, a, 1.0) == 0.0);
    CHECK(lp_distance(a, a, 2.0) == 0.0);
    CHECK(lp_distance(a, a, std::numeric_limits<double>::infinity()) == 0.0);
    Tensor c = Tensor::from_data({2}, {0.1, -0.5});
    Tensor zero = Tensor::from_data({2}, {0.0, 0.0});
    CHECK(lp_distance(zero, c, std::numeric_limits<double>::infinity()) ==
          Catch::Approx(0.5));
    CHECK(lp_distance(zero, c, 1.0) == Catch::Approx(0.6));
    CHECK_THROWS_WITH(lp_distance(a, Tensor::zeros({3}), 2.0),
                      Catch::Matchers::ContainsSubstring("shape mismatch"));
    CHECK_THROWS_WITH(lp_distance(a, b, 3.0),
                      Catch::Matchers::ContainsSubstring("p must be"));
}

TEST_CASE("cw loss closed-form values") {
    CHECK(cw_loss_value({1, 3, 2}, 0, 0.0) == Catch::Approx(2.0));
    CHECK(cw_loss_value({1, 3, 2}, 1, 0.0) == Catch::Approx(0.0));
    CHECK(cw_loss_value({1, 3, 2}, 1, 5.0) == Catch::Approx(-1.0));
    CHECK(target_margin({1, 3, 2}, 1) == Catch::Approx(1.0));
}

TEST_CASE("cw attack succeeds, re-verifies, and respects the box") {
    const Model& m = desk_model();
    const AttackConfig cfg = quick_attack();
    int tried = 0, ok = 0;
    double l2_sum = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
        const int y = test_set().labels[i];
        Tensor x = test_set().image(i);
        if (predicted_class(m, x) != y) continue;
        Rng rng(derive_seed(3, i));
        int t = static_cast<int>(rng.uniform_index(10));
        while (t == y) t = static_cast<int>(rng.uniform_index(10));
        AttackConfig c = cfg;
        c.seed = derive_seed(4, i);
        auto out = cw_l2_attack(m, x, y, t, c);
        ++tried;
        if (!out.ok()) continue;
        ++ok;
        const auto& ex = *out.example;
        // success predicate re-verified by an independent forward pass
        Tensor z = logits_deterministic(m, ex.perturbed);
        CHECK(target_margin(z.data(), t) >= 0.0);
        // box constraint holds exactly, no clipping involved
        for (double v : ex.perturbed.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // stored L2 equals the recomputed norm
        CHECK(ex.l2 ==
              Catch::Approx(lp_distance(ex.original, ex.perturbed, 2.0)).margin(1e-9));
        l2_sum += ex.l2;
    }
    REQUIRE(tried >= 25);
    CHECK(static_cast<double>(ok) / tried >= 0.9);
    CHECK(l2_sum / ok > 0.1);  // nonzero distortion when t != y
}

TEST_CASE("already-targeted input is a zero-perturbation fixed point") {
    const Model& m = desk_model();
    // pick an image classified with comfortable margin
    for (std::size_t i = 0; i < test_set().size(); ++i) {
        Tensor x = test_set().image(i);
        const int y = test_set().labels[i];
        Tensor z = logits_deterministic(m, x);
        if (argmax_row(z.data(), 0, 10) != y) continue;
        if (target_margin(z.data(), y) < 1.0) continue;
        AttackConfig cfg = quick_attack(0.5);
        cfg.initial_c = 1e-12;  // c -> 0
        cfg.adam_steps = 50;
        cfg.c_rounds = 1;
        auto out = cw_l2_attack(m, x, y, /*target=*/y, cfg);
        REQUIRE(out.ok());
        CHECK(out.example->l2 == 0.0);
        CHECK(out.example->perturbed.data() == x.data());
        return;
    }
    FAIL("no confidently classified image found");
}

TEST_CASE("increasing K never decreases the re-verified margin") {
    const Model& m = desk_model();
    const std::vector<double> ks = {0.0, 2.0, 4.0};
    std::vector<double> mean_margin;
    for (double K : ks) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < 12; ++i) {
            const int y = test_set().labels[i];
            Tensor x = test_set().image(i);
            if (predicted_class(m, x) != y) continue;
            Rng rng(derive_seed(5, i));
            int t = static_cast<int>(rng.uniform_index(10));
            while (t == y) t = static_cast<int>(rng.uniform_index(10));
            AttackConfig cfg = quick_attack(K);
            cfg.seed = derive_seed(6, i);
            auto out = cw_l2_attack(m, x, y, t, cfg);
            if (!out.ok()) continue;
            Tensor z = logits_deterministic(m, out.example->perturbed);
            const double margin = target_margin(z.data(), t);
            CHECK(margin >= K);  // the per-example guarantee
            sum += margin;
            ++n;
        }
        REQUIRE(n > 0);
        mean_margin.push_back(sum / n);
    }
    CHECK(mean_margin[1] >= mean_margin[0]);
    CHECK(mean_margin[2] >= mean_margin[1]);
}

TEST_CASE("multi-model success implies success on every constituent") {
    TrainConfig cfg;
    cfg.scheme = "standard";
    cfg.epochs = 3;
    std::vector<Model> models;
    for (int k = 0; k < 3; ++k) {
        cfg.seed = derive_seed(100, static_cast<std::uint64_t>(k));
        Dataset half = subsample(train_set(), 0.5, cfg.seed);
        models.push_back(train_scheme(half, test_set(), cfg).model);
    }
    std::vector<const Model*> ptrs;
    for (auto& m : models) ptrs.push_back(&m);

    int verified = 0;
    for (std::size_t i = 0; i < 10 && verified < 4; ++i) {
        const int y = test_set().labels[i];
        Tensor x = test_set().image(i);
        Rng rng(derive_seed(7, i));
        int t = static_cast<int>(rng.uniform_index(10));
        while (t == y) t = static_cast<int>(rng.uniform_index(10));
        AttackConfig atk = quick_attack();
        atk.seed = derive_seed(8, i);
        auto out = cw_l2_attack(ptrs, x, y, t, atk);
        if (out.skipped() || !out.ok()) continue;
        for (const Model* m : ptrs) {
            Tensor z = logits_deterministic(*m, out.example->perturbed);
            CHECK(target_margin(z.data(), t) >= 0.0);
        }
        ++verified;
    }
    CHECK(verified >= 3);
}

TEST_CASE("attack skips inputs the model already misclassifies") {
    const Model& m = desk_model();
    // find a correctly classified image, then lie about its label
    Tensor x = test_set().image(0);
    const int y = test_set().labels[0];
    REQUIRE(predicted_class(m, x) == y);
    auto out = cw_l2_attack(m, x, (y + 1) % 10, 3, quick_attack());
    CHECK(out.skipped());
    CHECK_FALSE(out.example.has_value());
}

TEST_CASE("fgs examples") {
    const Model& m = desk_model();
    Tensor x = test_set().image(1);
    const int y = test_set().labels[1];

    SECTION("zero step returns the input") {
        auto ex = fgs_attack(m, x, y, 0.0);
        CHECK(ex.perturbed.data() == x.data());
        CHECK(ex.l2 == 0.0);
    }
    SECTION("Linf bounded by the step and pixels stay in the box") {
        auto ex = fgs_attack(m, x, y, 0.2);
        CHECK(lp_distance(x, ex.perturbed, std::numeric_limits<double>::infinity()) <=
              0.2 + 1e-12);
        for (double v : ex.perturbed.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(ex.target_label == -1);
    }
    SECTION("step 0.2 flips at least half of correctly classified images") {
        int correct = 0, flipped = 0;
        for (std::size_t i = 0; i < 100; ++i) {
            Tensor xi = test_set().image(i);
            const int yi = test_set().labels[i];
            if (predicted_class(m, xi) != yi) continue;
            ++correct;
            auto ex = fgs_attack(m, xi, yi, 0.2);
            if (predicted_class(m, ex.perturbed) != yi) ++flipped;
        }
        REQUIRE(correct >= 80);
        CHECK(static_cast<double>(flipped) / correct >= 0.5);
    }
}

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    cfg.confidence = -1.0;
    CHECK_THROWS(cfg.validate());
    cfg = AttackConfig{};
    cfg.l2_cutoff = 0.0;
    CHECK_THROWS(cfg.validate());
}
