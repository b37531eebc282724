// AdamW and global-norm gradient clipping.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ketlab/optim.hpp"
#include "ketlab/rng.hpp"
#include "ketlab/tensor.hpp"
#include "testutil.hpp"

using namespace ketlab;

TEST_CASE("adamw leaves parameters alone with zero gradient and zero decay") {
    Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    p.grad();  // allocate zeros
    AdamW opt({p}, {0.1, 0.9, 0.999, 1e-8, 0.0});
    opt.step();
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(p.data()[2] == 0.5);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw first step with unit gradient moves by about -lr") {
    // bias correction at t=1 gives mhat = vhat = 1, so the update is
    // -lr / (1 + eps)
    Tensor p = Tensor::from_data({1}, {0.7}, true);
    p.grad()[0] = 1.0;
    AdamW opt({p}, {0.1, 0.9, 0.999, 1e-8, 0.0});
    opt.step();
    CHECK(std::abs(p.data()[0] - (0.7 - 0.1)) < 1e-7);
}

TEST_CASE("adamw decay-only case multiplies weights by (1 - lr wd)") {
    Tensor p = Tensor::from_data({2}, {2.0, -4.0}, true);
    p.grad();
    AdamW opt({p}, {0.1, 0.9, 0.999, 1e-8, 0.01});
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-12));
    CHECK(p.data()[1] == doctest::Approx(-4.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-12));
}

TEST_CASE("adamw step counter increases by one per call") {
    Tensor p = Tensor::from_data({1}, {0.0}, true);
    AdamW opt({p}, {});
    for (int i = 1; i <= 5; ++i) {
        opt.step();
        CHECK(opt.step_count() == i);
    }
}

TEST_CASE("clip_grad_norm leaves small gradients untouched") {
    Tensor p(Shape{2}, true);
    p.grad()[0] = 0.3;
    p.grad()[1] = 0.4;  // norm 0.5
    std::vector<Tensor> params{p};
    const double pre = clip_grad_norm(params, 1.0);
    CHECK(pre == doctest::Approx(0.5));
    CHECK(p.grad()[0] == 0.3);
    CHECK(p.grad()[1] == 0.4);
}

TEST_CASE("clip_grad_norm rescales [3,4] to [0.6,0.8]") {
    Tensor p(Shape{2}, true);
    p.grad()[0] = 3.0;
    p.grad()[1] = 4.0;
    std::vector<Tensor> params{p};
    const double pre = clip_grad_norm(params, 1.0);
    CHECK(pre == doctest::Approx(5.0));
    CHECK(p.grad()[0] == doctest::Approx(0.6));
    CHECK(p.grad()[1] == doctest::Approx(0.8));
}

TEST_CASE("clip_grad_norm keeps the global norm within bound for random inputs") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Tensor> params;
        for (int i = 0; i < 4; ++i) {
            Tensor p(Shape{5}, true);
            for (int j = 0; j < 5; ++j) p.grad()[j] = rng.uniform(-3.0, 3.0);
            params.push_back(p);
        }
        clip_grad_norm(params, 1.0);
        double sq = 0.0;
        for (auto &p : params)
            for (double g : p.grad_vec()) sq += g * g;
        CHECK(std::sqrt(sq) <= 1.0 + 1e-12);
    }
}

TEST_CASE("adamw is deterministic given identical inputs") {
    auto run = [] {
        Tensor p = Tensor::from_data({4}, {0.1, 0.2, 0.3, 0.4}, true);
        AdamW opt({p}, {3e-4, 0.9, 0.999, 1e-8, 1e-5});
        for (int step = 0; step < 25; ++step) {
            for (int j = 0; j < 4; ++j) p.grad()[j] = 0.01 * (j + 1) * (step + 1);
            opt.step();
            opt.zero_grad();
        }
        return p.values();
    };
    const auto a = run();
    const auto b = run();
    for (int j = 0; j < 4; ++j) CHECK(a[j] == b[j]);
}
