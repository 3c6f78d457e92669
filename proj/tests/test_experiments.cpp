#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "slowfast/experiments.hpp"
#include "slowfast/rate_fit.hpp"

using namespace slowfast;

TEST_CASE("fit_rate on synthetic power laws") {
    std::vector<RatePoint> pts;
    for (int e = 2; e <= 7; ++e) {
        const double eps = std::ldexp(1.0, -e);
        pts.push_back({eps, 0.7 * std::sqrt(eps), 1e-6});
    }
    const RateFitResult fit = fit_rate(pts);
    CHECK(fit.slope == Catch::Approx(0.5).margin(1e-9));
    CHECK(fit.intercept == Catch::Approx(std::log2(0.7)).margin(1e-6));
    CHECK(fit.r_squared == Catch::Approx(1.0).margin(1e-9));

    std::vector<RatePoint> linear;
    for (int e = 2; e <= 5; ++e) {
        const double eps = std::ldexp(1.0, -e);
        linear.push_back({eps, 3.0 * eps, 1e-8});
    }
    const RateFitResult lf = fit_rate(linear);
    CHECK(lf.slope == Catch::Approx(1.0).margin(1e-9));
    CHECK(lf.intercept == Catch::Approx(std::log2(3.0)).margin(1e-6));

    CHECK_THROWS(fit_rate({pts[0], pts[1], pts[2]}));
}

TEST_CASE("fit_rate excludes noise-dominated points") {
    std::vector<RatePoint> pts;
    for (int e = 2; e <= 7; ++e) {
        const double eps = std::ldexp(1.0, -e);
        pts.push_back({eps, std::sqrt(eps), 0.01 * std::sqrt(eps)});
    }
    pts.push_back({std::ldexp(1.0, -9), 1e-4, 1e-3});  // stderr 10x the error
    const RateFitResult fit = fit_rate(pts);
    CHECK(fit.points.size() == 6);
    CHECK(fit.slope == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("fit_rate confidence interval covers a noisy slope") {
    std::mt19937 rng(11);
    std::normal_distribution<double> noise(0.0, 0.03);
    std::size_t covered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RatePoint> pts;
        for (int e = 2; e <= 8; ++e) {
            const double eps = std::ldexp(1.0, -e);
            const double err = std::sqrt(eps) * std::exp(noise(rng));
            pts.push_back({eps, err, 0.03 * err});
        }
        const RateFitResult fit = fit_rate(pts);
        if (std::abs(fit.slope - 0.5) <= fit.slope_ci_halfwidth) ++covered;
    }
    CHECK(covered >= 42);  // nominal 95%, allow slack
}

TEST_CASE("knee detection drops a pre-asymptotic point") {
    std::size_t dropped = 99;
    std::vector<RatePoint> pts;
    for (int e = 2; e <= 8; ++e) {
        const double eps = std::ldexp(1.0, -e);
        const double err = std::sqrt(eps);
        pts.push_back({eps, err, 0.01 * err});
    }
    pts[0].error *= 3.0;  // saturated largest-epsilon point
    pts[0].stderr_ *= 3.0;
    const RateFitResult fit = detail::fit_with_knee_detection(pts, dropped);
    CHECK(dropped == 1);
    CHECK(fit.slope == Catch::Approx(0.5).margin(1e-3));

    // clean data keeps every point
    pts[0].error /= 3.0;
    const RateFitResult clean = detail::fit_with_knee_detection(pts, dropped);
    CHECK(dropped == 0);
    CHECK(clean.points.size() == 7);
}

TEST_CASE("averaged mode law and the weak oracle") {
    const double c = 1.0;
    const ModelSpec model = builtin_model("linear-ou", 4, {{"c", c}});
    for (std::size_t k = 0; k < 4; ++k) {
        const double lam = model.basis->lambda(k);
        const double b = 1.0 / static_cast<double>(k + 1);
        CHECK(averaged_mode_rate(model, k) == Catch::Approx(lam - b * b / (lam + c)));
    }

    const SpectralField x0 = default_initial_x(model.basis);
    const ModeLaw law0 = averaged_mode_law(model, x0, 0, 0.0);
    CHECK(law0.mean == Catch::Approx(x0.coeffs[0]));
    CHECK(law0.variance == 0.0);

    const double t = 0.3;
    const SpectralField v = SpectralField::unit(model.basis, 0);
    double quad = 0.0, lin = 0.0;
    const ModeLaw law = averaged_mode_law(model, x0, 0, t);
    quad = law.variance;
    lin = law.mean;
    CHECK(weak_oracle_cos(model, x0, v, t)
          == Catch::Approx(std::exp(-quad / 2.0) * std::cos(lin)));
    CHECK(weak_oracle_cos(model, x0, v, 0.0) == Catch::Approx(std::cos(x0.coeffs[0])));
}

TEST_CASE("run_paired structural guards") {
    ModelSpec model = builtin_model("linear-ou", 2);
    SimConfig cfg;
    cfg.m = 2;
    cfg.dt = 1e-2;
    cfg.T = 0.1;
    cfg.samples = 2;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);

    ModelSpec no_fbar = model;
    no_fbar.closed_form_fbar.reset();
    CHECK_THROWS(run_paired(no_fbar, cfg, x0, y0, true));

    ModelSpec varying_g1 = model;
    varying_g1.g1_constant = false;
    CHECK_THROWS(run_paired(varying_g1, cfg, x0, y0, true));
}

TEST_CASE("strong error vanishes when the slow drift ignores y") {
    const ModelSpec model = builtin_model("linear-ou", 4, {{"b1_scale", 0.0}});
    SimConfig cfg;
    cfg.m = 4;
    cfg.dt = 1e-3;
    cfg.T = 0.1;
    cfg.samples = 8;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);
    const ErrorEstimate est = strong_error(model, cfg, 0.25, x0, y0);
    CHECK(est.error < 1e-12);

    const double bias = doubling_test(cfg, [&](const SimConfig& c) {
        return strong_error(model, c, 0.25, x0, y0);
    });
    CHECK(bias == 0.0);
}

TEST_CASE("weak error decomposition on the decoupled model") {
    // with B1 = 0 the slow update is exact in law, so the coupled difference
    // is identically zero and the oracle error is pure Monte Carlo noise
    const ModelSpec model = builtin_model("linear-ou", 4, {{"b1_scale", 0.0}});
    SimConfig cfg;
    cfg.m = 4;
    cfg.dt = 1e-3;
    cfg.T = 0.2;
    cfg.samples = 4000;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);
    const SpectralField v = SpectralField::unit(model.basis, 0);
    const auto phi = [](const SpectralField& u) { return std::cos(u.coeffs[0]); };
    const auto exact = [&](double t) { return weak_oracle_cos(model, x0, v, t); };
    const WeakErrorResult res = weak_error(model, cfg, 0.25, x0, y0, phi, exact);
    CHECK(res.coupled.error < 1e-14);
    CHECK(res.oracle.error <= 4.0 * res.oracle.stderr_);
}

TEST_CASE("sup inside dominates sup outside") {
    const ModelSpec model = builtin_model("linear-ou", 4);
    SimConfig cfg;
    cfg.m = 4;
    cfg.dt = 1e-3;
    cfg.T = 0.2;
    cfg.samples = 200;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);
    const ErrorEstimate outside = strong_error(model, cfg, 0.125, x0, y0);
    const ErrorEstimate inside = strong_sup_error(model, cfg, 0.125, x0, y0);
    CHECK(inside.error >= outside.error);
    CHECK(outside.error > 0.0);
}

TEST_CASE("small-scale strong rate study") {
    const ModelSpec model = builtin_model("linear-ou", 4);
    SimConfig cfg;
    cfg.m = 4;
    cfg.dt = 1e-3;
    cfg.T = 0.25;
    cfg.samples = 500;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);
    std::vector<double> eps;
    for (int e = 2; e <= 7; ++e) eps.push_back(std::ldexp(1.0, -e));
    const RateExperimentResult res = run_rate_experiment(
        cfg, eps,
        [&](const SimConfig& c) { return strong_error(model, c, c.epsilon, x0, y0); },
        /*guard_threshold=*/0.3);
    CHECK(res.guard_ok);
    REQUIRE(res.points.size() == 6);
    for (std::size_t i = 1; i < res.points.size(); ++i)
        CHECK(res.points[i].error < res.points[i - 1].error);
    CHECK(res.fit.slope > 0.35);
    CHECK(res.fit.slope < 0.65);
    CHECK(res.fit.r_squared > 0.9);
}

TEST_CASE("weak error is dominated by the strong error") {
    // for Lipschitz phi: |E[phi(X) - phi(Xbar)]| <= Lip(phi) * E|X - Xbar|
    const ModelSpec model = builtin_model("linear-ou", 4);
    SimConfig cfg;
    cfg.m = 4;
    cfg.dt = 1e-3;
    cfg.T = 0.2;
    cfg.samples = 500;
    const SpectralField x0 = default_initial_x(model.basis);
    const SpectralField y0 = SpectralField::zero(model.basis);
    const SpectralField v = SpectralField::unit(model.basis, 0);
    const auto phi = [](const SpectralField& u) { return std::cos(u.coeffs[0]); };
    const auto exact = [&](double t) { return weak_oracle_cos(model, x0, v, t); };
    for (double eps : {0.25, 0.0625}) {
        const ErrorEstimate strong = strong_error(model, cfg, eps, x0, y0);
        const WeakErrorResult weak = weak_error(model, cfg, eps, x0, y0, phi, exact, true);
        const double lip = 1.0;
        CHECK(weak.coupled.error
              <= 2.0 * lip * strong.error + 3.0 * (weak.coupled.stderr_ + strong.stderr_));
    }
}

TEST_CASE("galerkin refinement") {
    SimConfig cfg;
    cfg.m = 16;
    cfg.dt = 1e-3;
    cfg.T = 0.1;
    cfg.samples = 50;
    cfg.epsilon = 0.25;
    const auto init_x = [](std::shared_ptr<const SpectralBasis> b) { return default_initial_x(b); };
    const auto init_y = [](std::shared_ptr<const SpectralBasis> b) { return SpectralField::zero(b); };

    const auto rows = galerkin_refinement("linear-ou", {}, cfg, {4, 8, 16}, 16, init_x, init_y);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].distance > rows[1].distance);
    CHECK(rows[1].distance > rows[2].distance);
    CHECK(rows[2].distance == 0.0);  // m = M is the reference itself
    CHECK(rows[0].tail_bound > rows[1].tail_bound);
    CHECK(rows[0].distance <= rows[0].tail_bound);

    CHECK_THROWS(galerkin_refinement("linear-ou", {}, cfg, {32}, 16, init_x, init_y));
}

TEST_CASE("default initial condition") {
    auto basis = std::make_shared<const SpectralBasis>(SpectralBasis::laplacian(4));
    const SpectralField x = default_initial_x(basis);
    CHECK(x.coeffs[0] == 1.0);
    CHECK(x.coeffs[2] == Catch::Approx(std::pow(3.0, -1.2)));
}
