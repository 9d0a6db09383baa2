#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nsl/optimizer.hpp"

using namespace nsl;

TEST_SUITE_BEGIN("optimizer");

TEST_CASE("config validation rejects bad hyperparameters") {
    TrainConfig config;
    CHECK_NOTHROW(config.validate());

    TrainConfig bad = config;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(bad.validate(), OutOfRange);
    bad = config;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), OutOfRange);
    bad = config;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), OutOfRange);
    bad = config;
    bad.beta2 = 0.0;
    CHECK_THROWS_AS(bad.validate(), OutOfRange);
    bad = config;
    bad.eps = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidEpsilon);
}

TEST_CASE("config digest is stable and sensitive") {
    TrainConfig a, b;
    CHECK(a.digest() == b.digest());
    b.seed = 99;
    CHECK(a.digest() != b.digest());
    b = a;
    b.learning_rate = 0.0011;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("zero gradients leave parameters fixed") {
    Rng rng(31);
    NslParams params = test::random_params(rng);
    params.stain.raw = row_normalize(params.stain.raw);

    const Gradients zero{};
    AdamState state;
    const TrainConfig config;

    auto [next, next_state] = adam_step(params, zero, state, config);
    CHECK(next_state.step == 1);
    const auto before = flatten(params);
    const auto after = flatten(next);
    for (int i = 0; i < 14; ++i) CHECK(std::fabs(after[i] - before[i]) < 1e-15);

    // Repeated zero-gradient steps stay fixed too.
    auto [again, s2] = adam_step(next, zero, next_state, config);
    CHECK(s2.step == 2);
    const auto after2 = flatten(again);
    for (int i = 0; i < 14; ++i) CHECK(std::fabs(after2[i] - before[i]) < 1e-15);
}

TEST_CASE("first-step update is -lr * g / (|g| + eps) after bias correction") {
    NslParams params;  // w = 0
    Gradients grads{};
    grads.d_w = 0.5;

    const TrainConfig config;
    AdamState state;
    auto [next, next_state] = adam_step(params, grads, state, config);

    // m_hat = g, v_hat = g^2 on step 1.
    const double expected = -config.learning_rate * 0.5 / (0.5 + config.adam_eps);
    CHECK(next.w == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::fabs(next.w + 0.001) < 1e-8);
}

TEST_CASE("first step moves opposite the gradient sign") {
    Rng rng(32);
    // Slots 9..13 (c, w, b) are unconstrained; matrix entries get
    // re-normalized after the step so their raw motion is not comparable.
    for (int slot = 9; slot < 14; ++slot) {
        NslParams params = test::random_params(rng);
        params.stain.raw = row_normalize(params.stain.raw);
        const double g = rng.uniform(-2.0, 2.0);
        if (g == 0) continue;
        auto flat_grads = std::array<double, 14>{};
        flat_grads[slot] = g;
        Gradients grads{};
        grads.d_c = {flat_grads[9], flat_grads[10], flat_grads[11]};
        grads.d_w = flat_grads[12];
        grads.d_b = flat_grads[13];

        AdamState state;
        const TrainConfig config;
        auto [next, ignored] = adam_step(params, grads, state, config);
        const double delta = flatten(next)[slot] - flatten(params)[slot];
        CHECK(delta * g < 0);
    }
}

TEST_CASE("the stored matrix is row-normalized after every step") {
    Rng rng(33);
    NslParams params = test::random_params(rng);
    AdamState state;
    const TrainConfig config;
    for (int step = 0; step < 5; ++step) {
        Gradients grads{};
        for (double& v : grads.d_raw.m) v = rng.uniform(-1.0, 1.0);
        grads.d_c = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        grads.d_w = rng.uniform(-1, 1);
        grads.d_b = rng.uniform(-1, 1);
        auto [next, next_state] = adam_step(params, grads, state, config);
        params = next;
        state = next_state;
        for (int r = 0; r < 3; ++r) {
            const Vec3 row = params.stain.raw.row(r);
            const double norm = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
            CHECK(std::fabs(norm - 1.0) < 1e-12);
        }
    }
    CHECK(state.step == 5);
}

TEST_CASE("non-finite gradients are rejected") {
    NslParams params;
    Gradients grads{};
    grads.d_w = std::nan("");
    AdamState state;
    CHECK_THROWS_AS(adam_step(params, grads, state, TrainConfig{}), NonFinite);
}

TEST_SUITE_END();
