#include <catch2/catch_amalgamated.hpp>

#include "msd/diffusion.hpp"
#include "msd/rng.hpp"
#include "support/gradcheck.hpp"

using namespace msd;

namespace {

// tiny hand-built schedule for exact-value examples
DiffusionSchedule toy_schedule(std::vector<double> alphas) {
    DiffusionSchedule s;
    s.kind = "custom";
    s.T = alphas.size();
    s.S = alphas.size();
    s.alpha.assign(s.T + 1, 1.0);
    s.alpha_bar.assign(s.T + 1, 1.0);
    for (size_t t = 1; t <= s.T; ++t) {
        s.alpha[t] = alphas[t - 1];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * alphas[t - 1];
    }
    s.ddim_index_map.resize(s.T);
    for (size_t i = 0; i < s.T; ++i) s.ddim_index_map[i] = i + 1;
    return s;
}

}  // namespace

TEST_CASE("cosine schedule satisfies the spec invariants") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    REQUIRE(s.alpha_bar[1] > 0.99);
    REQUIRE(s.alpha_bar[1000] < 1e-3);
    double prod = 1.0;
    for (size_t t = 1; t <= 1000; ++t) {
        REQUIRE(s.alpha[t] > 0.0);
        REQUIRE(s.alpha[t] < 1.0);
        if (t >= 2) REQUIRE(s.alpha[t] < s.alpha[t - 1]);
        prod *= s.alpha[t];
        REQUIRE(s.alpha_bar[t] == Catch::Approx(prod).epsilon(1e-10));
    }
    REQUIRE(s.ddim_index_map.size() == 20);
    REQUIRE(s.ddim_index_map.back() == 1000);
}

TEST_CASE("linear schedule is valid too") {
    DiffusionSchedule s = make_schedule("linear", 1000, 20);
    REQUIRE_NOTHROW(validate_schedule(s));
    REQUIRE(s.alpha_bar[1000] < 1e-3);
}

TEST_CASE("degenerate and invalid schedules") {
    DiffusionSchedule s = make_schedule("cosine", 1, 1);
    REQUIRE(s.ddim_index_map == std::vector<size_t>{1});
    REQUIRE_THROWS_AS(make_schedule("cosine", 10, 20), InvalidSchedule);
    REQUIRE_THROWS_AS(make_schedule("nope", 10, 2), InvalidSchedule);
    // increasing alphas must be rejected
    DiffusionSchedule bad = toy_schedule({0.5, 0.9});
    REQUIRE_THROWS_AS(validate_schedule(bad), InvalidSchedule);
}

TEST_CASE("K = 300 maps to 6 DDIM steps on the default grid") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    REQUIRE(ddim_snap_down(s, 300) == 300);
    REQUIRE(ddim_snap_down(s, 320) == 300);
    REQUIRE(ddim_snap_down(s, 49) == 0);
    auto chain = ddim_chain(s, 300);
    REQUIRE(chain == std::vector<size_t>{300, 250, 200, 150, 100, 50});
    REQUIRE(chain.size() == 6);
}

TEST_CASE("forward_sample closed form") {
    DiffusionSchedule s = toy_schedule({0.5, 0.5});  // alpha_bar_2 = 0.25
    Tensor m0 = Tensor::constant(1, 1, {2.0});
    Tensor eps0 = Tensor::constant(1, 1, {0.0});
    Tensor eps4 = Tensor::constant(1, 1, {4.0});

    SECTION("eps = 0") {
        Tensor m = forward_sample(s, m0, 2, eps0);
        REQUIRE(m.scalar_value() == Catch::Approx(std::sqrt(0.25) * 2.0));
    }
    SECTION("m0 = 0") {
        Tensor z = Tensor::constant(1, 1, {0.0});
        Tensor m = forward_sample(s, z, 2, eps4);
        REQUIRE(m.scalar_value() == Catch::Approx(std::sqrt(0.75) * 4.0));
    }
    SECTION("alpha_bar = 0.25, m0 = 2, eps = 4") {
        Tensor m = forward_sample(s, m0, 2, eps4);
        REQUIRE(m.scalar_value() ==
                Catch::Approx(0.5 * 2.0 + std::sqrt(0.75) * 4.0).epsilon(1e-12));
        REQUIRE(m.scalar_value() == Catch::Approx(4.4641016151).epsilon(1e-9));
    }
    SECTION("shape mismatch") {
        Tensor bad = Tensor::constant(1, 2, {0.0, 0.0});
        REQUIRE_THROWS_AS(forward_sample(s, m0, 2, bad), ShapeMismatch);
    }
}

TEST_CASE("forward_step single Markov step") {
    DiffusionSchedule s = toy_schedule({0.81});
    Tensor m = Tensor::constant(1, 1, {1.0});
    Tensor e = Tensor::constant(1, 1, {1.0});
    Tensor out = forward_step(s, m, 1, e);
    REQUIRE(out.scalar_value() == Catch::Approx(0.9 + std::sqrt(0.19)).epsilon(1e-12));
    REQUIRE(out.scalar_value() == Catch::Approx(1.33589).margin(1e-5));
    REQUIRE(forward_step_scalar(s, 1.0, 1, 1.0) == out.scalar_value());
}

TEST_CASE("composed forward steps match the closed form in moments") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    const double m0 = 1.7;
    for (size_t target : {size_t(100), size_t(500), size_t(950)}) {
        // mean: analytic, composing with eps = 0
        double m = m0;
        for (size_t t = 1; t <= target; ++t) m = forward_step_scalar(s, m, t, 0.0);
        REQUIRE(m == Catch::Approx(std::sqrt(s.alpha_bar[target]) * m0).epsilon(1e-10));

        // std over Monte-Carlo draws within 2%
        Rng rng(1000 + target);
        const int n = 10000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = m0;
            for (size_t t = 1; t <= target; ++t) x = forward_step_scalar(s, x, t, rng.normal());
            sum += x;
            sum2 += x * x;
        }
        double mean = sum / n;
        double var = sum2 / n - mean * mean;
        double expect_std = std::sqrt(1.0 - s.alpha_bar[target]);
        REQUIRE(std::sqrt(var) == Catch::Approx(expect_std).epsilon(0.02));
    }
}

TEST_CASE("tensor forward_step composition matches forward_sample at eps = 0") {
    DiffusionSchedule s = make_schedule("cosine", 100, 10);
    Rng rng(5);
    Tensor m0 = Tensor::constant(2, 3, rng.normal_vector(6));
    Tensor zero = Tensor::zeros(2, 3);
    Tensor direct = forward_sample(s, m0, 10, zero);
    Tensor composed = m0;
    for (size_t t = 1; t <= 10; ++t) composed = forward_step(s, composed, t, zero);
    for (size_t i = 0; i < 6; ++i)
        REQUIRE(composed.values()[i] == Catch::Approx(direct.values()[i]).epsilon(1e-12));
}

TEST_CASE("ddpm_reverse_step posterior against Gaussian-conjugacy oracle") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    size_t t = 137;
    double x0 = 0.8, mt = -0.4;
    // independent route: product of the two Gaussians q(m_t|m_{t-1}) q(m_{t-1}|m0)
    double prior_mean = std::sqrt(s.alpha_bar[t - 1]) * x0;
    double prior_var = 1.0 - s.alpha_bar[t - 1];
    double like_prec = s.alpha[t] / s.beta(t);
    double post_prec = 1.0 / prior_var + like_prec;
    double post_mean =
        (prior_mean / prior_var + std::sqrt(s.alpha[t]) * mt / s.beta(t)) / post_prec;

    Tensor out =
        ddpm_reverse_step(s, Tensor::scalar(mt), t, Tensor::scalar(x0), Tensor::scalar(0.0));
    REQUIRE(out.scalar_value() == Catch::Approx(post_mean).epsilon(1e-10));

    // injected noise scales by the posterior std
    Tensor noisy =
        ddpm_reverse_step(s, Tensor::scalar(mt), t, Tensor::scalar(x0), Tensor::scalar(1.0));
    REQUIRE(noisy.scalar_value() - out.scalar_value() ==
            Catch::Approx(std::sqrt(1.0 / post_prec)).epsilon(1e-10));
}

TEST_CASE("ddpm_reverse_step at t = 1 returns the posterior mean exactly") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Tensor big_noise = Tensor::scalar(1e6);
    Tensor a = ddpm_reverse_step(s, Tensor::scalar(0.3), 1, Tensor::scalar(0.9), big_noise);
    Tensor b =
        ddpm_reverse_step(s, Tensor::scalar(0.3), 1, Tensor::scalar(0.9), Tensor::scalar(0.0));
    REQUIRE(a.scalar_value() == b.scalar_value());
    // at t = 1 the posterior collapses onto x0_hat
    REQUIRE(a.scalar_value() == Catch::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("ddpm reverse with exact x0 converges to m0") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Rng rng(9);
    Tensor m0 = Tensor::constant(1, 8, rng.normal_vector(8));
    Tensor eps = Tensor::constant(1, 8, rng.normal_vector(8));
    Tensor m = forward_sample(s, m0, 1000, eps);
    Tensor zero = Tensor::zeros(1, 8);
    for (size_t t = 1000; t >= 1; --t) m = ddpm_reverse_step(s, m, t, m0, zero);
    double err = 0.0, norm = 0.0;
    for (size_t i = 0; i < 8; ++i) {
        err += (m.values()[i] - m0.values()[i]) * (m.values()[i] - m0.values()[i]);
        norm += m0.values()[i] * m0.values()[i];
    }
    REQUIRE(std::sqrt(err) < 0.05 * std::sqrt(norm));
}

TEST_CASE("ddim reverse chain with exact-x0 oracle reproduces m0 below 1e-9") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Rng rng(13);
    Tensor m0 = Tensor::constant(2, 4, rng.normal_vector(8));
    Tensor eps = Tensor::constant(2, 4, rng.normal_vector(8));
    for (size_t start : {size_t(1000), size_t(300), size_t(50)}) {
        Tensor m = forward_sample(s, m0, start, eps);
        auto chain = ddim_chain(s, start);
        for (size_t i = 0; i < chain.size(); ++i) {
            size_t t = chain[i];
            size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
            m = ddim_reverse_step(s, m, t, t_prev, m0);
        }
        for (size_t i = 0; i < 8; ++i) REQUIRE(std::abs(m.values()[i] - m0.values()[i]) < 1e-9);
    }
}

TEST_CASE("ddim reverse with t_prev == t is the identity") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Rng rng(17);
    Tensor m = Tensor::constant(1, 4, rng.normal_vector(4));
    Tensor x0 = Tensor::constant(1, 4, rng.normal_vector(4));
    Tensor out = ddim_reverse_step(s, m, 300, 300, x0);
    for (size_t i = 0; i < 4; ++i)
        REQUIRE(out.values()[i] == Catch::Approx(m.values()[i]).epsilon(1e-12));
}

TEST_CASE("ddim off-grid steps raise") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Tensor m = Tensor::scalar(1.0);
    REQUIRE_THROWS_AS(ddim_reverse_step(s, m, 299, 250, m), NotOnDdimGrid);
    REQUIRE_THROWS_AS(ddim_reverse_step(s, m, 300, 200, m), NotOnDdimGrid);
    REQUIRE_THROWS_AS(ddim_forward_step(s, m, 250, 350, m), NotOnDdimGrid);
}

TEST_CASE("ddim forward/reverse round-trip with a frozen toy denoiser") {
    DiffusionSchedule s = make_schedule("cosine", 1000, 20);
    Rng rng(19);
    std::vector<double> start = rng.normal_vector(6);
    Tensor m0 = Tensor::constant(2, 3, start);

    // fixed linear toy denoiser x0_hat(m, t) = m / sqrt(alpha_bar_t):
    // self-consistent along the trajectory, so inversion telescopes exactly
    auto toy = [&](const Tensor& m, size_t t) {
        return scale(m, 1.0 / std::sqrt(s.alpha_bar[t]));
    };

    size_t K = 300;
    auto chain = ddim_chain(s, K);  // {300, ..., 50}
    std::vector<size_t> up(chain.rbegin(), chain.rend());

    Tensor m = m0;
    size_t t_from = 0;
    for (size_t t_to : up) {
        Tensor x0 = t_from == 0 ? m : toy(m, t_from);
        m = ddim_forward_step(s, m, t_from, t_to, x0);
        t_from = t_to;
    }
    for (size_t i = 0; i < chain.size(); ++i) {
        size_t t = chain[i];
        size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
        m = ddim_reverse_step(s, m, t, t_prev, toy(m, t));
    }
    for (size_t i = 0; i < 6; ++i) REQUIRE(std::abs(m.values()[i] - start[i]) < 1e-6);
}

TEST_CASE("gradients flow through a composed DDIM chain") {
    DiffusionSchedule s = make_schedule("cosine", 100, 10);
    Rng rng(23);
    auto w = std::make_shared<std::vector<double>>(rng.normal_vector(9, 0.3));
    auto x = std::make_shared<std::vector<double>>(rng.normal_vector(3));
    Tensor target = Tensor::constant(1, 3, Rng(24).normal_vector(3));

    auto build = [&](std::vector<Tensor>& l) {
        // toy model x0_hat = m W, reverse over 3 grid steps
        Tensor m = l[1];
        std::vector<size_t> chain = {30, 20, 10};
        for (size_t i = 0; i < chain.size(); ++i) {
            size_t t = chain[i];
            size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
            Tensor x0 = matmul(m, l[0]);
            m = ddim_reverse_step(s, m, t, t_prev, x0);
        }
        return mse(m, target);
    };
    auto res = gradcheck::check(build, {{w, 3, 3}, {x, 1, 3}});
    CAPTURE(res.max_rel_err, res.checked);
    REQUIRE(res.ok);
}
