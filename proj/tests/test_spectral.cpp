#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "slowfast/spectral.hpp"

using namespace slowfast;

namespace {

std::shared_ptr<const SpectralBasis> laplacian(std::size_t m) {
    return std::make_shared<const SpectralBasis>(SpectralBasis::laplacian(m));
}

SpectralField random_field(std::shared_ptr<const SpectralBasis> basis, std::mt19937& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    SpectralField u = SpectralField::zero(std::move(basis));
    for (double& c : u.coeffs) c = normal(rng);
    return u;
}

// Direct summation oracle, independent of sobolev_norm's loop order.
double norm_oracle(const SpectralField& u, double s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        acc += std::pow(u.basis->lambda(k), s) * u.coeffs[k] * u.coeffs[k];
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("basis validation") {
    CHECK_THROWS(SpectralBasis({}));
    CHECK_THROWS(SpectralBasis({1.0, 1.0}));
    CHECK_THROWS(SpectralBasis({-1.0, 2.0}));
    CHECK_THROWS(SpectralBasis({2.0, 1.0}));
    const auto basis = SpectralBasis::laplacian(3);
    CHECK(basis.lambda(0) == Catch::Approx(M_PI * M_PI));
    CHECK(basis.lambda(2) == Catch::Approx(9.0 * M_PI * M_PI));
}

TEST_CASE("sobolev norm") {
    auto basis = laplacian(4);
    const SpectralField e1 = SpectralField::unit(basis, 0);
    CHECK(sobolev_norm(e1, 0.0) == 1.0);
    CHECK(sobolev_norm(e1, 2.0) == Catch::Approx(M_PI * M_PI));

    // u = [1,1] over lambda = [pi^2, 4 pi^2], s = 1 -> sqrt(5 pi^2)
    auto small = std::make_shared<const SpectralBasis>(
        SpectralBasis(std::vector<double>{M_PI * M_PI, 4.0 * M_PI * M_PI}));
    const SpectralField u(small, {1.0, 1.0});
    CHECK(sobolev_norm(u, 1.0) == Catch::Approx(std::sqrt(5.0 * M_PI * M_PI)));

    std::mt19937 rng(7);
    for (int i = 0; i < 20; ++i) {
        const SpectralField v = random_field(basis, rng);
        for (double s : {-1.0, 0.0, 0.5, 2.0})
            CHECK(sobolev_norm(v, s) == Catch::Approx(norm_oracle(v, s)).epsilon(1e-13));
    }
}

TEST_CASE("semigroup") {
    auto basis = laplacian(6);
    const SpectralField e1 = SpectralField::unit(basis, 0);
    std::mt19937 rng(11);
    const SpectralField u = random_field(basis, rng);

    CHECK(h_norm(apply_semigroup(u, 0.0) - u) == 0.0);
    CHECK(apply_semigroup(e1, 1.0).coeffs[0] == Catch::Approx(std::exp(-M_PI * M_PI)));
    CHECK_THROWS(apply_semigroup(u, -0.1));

    // contraction |e^{tA}u| <= e^{-lambda_1 t}|u|, exact per-mode statement
    for (double t : {0.01, 0.1, 1.0}) {
        const SpectralField v = apply_semigroup(u, t);
        CHECK(h_norm(v) <= std::exp(-basis->lambda(0) * t) * h_norm(u) * (1.0 + 1e-14));
    }

    // two-mode example from the smoothing bound: |e^{0.1 A}[1,1]| <= e^{-0.1 pi^2} sqrt(2)
    auto b2 = std::make_shared<const SpectralBasis>(
        SpectralBasis(std::vector<double>{M_PI * M_PI, 4.0 * M_PI * M_PI}));
    const SpectralField w(b2, {1.0, 1.0});
    CHECK(h_norm(apply_semigroup(w, 0.1)) <= std::exp(-0.1 * M_PI * M_PI) * std::sqrt(2.0));

    // semigroup property to machine precision
    const SpectralField ab = apply_semigroup(apply_semigroup(u, 0.3), 0.2);
    const SpectralField once = apply_semigroup(u, 0.5);
    CHECK(h_norm(ab - once) < 1e-15 * h_norm(u));
}

TEST_CASE("semigroup smoothing mode-wise bound") {
    auto basis = laplacian(16);
    const double s1 = 0.0, s2 = 1.5;
    for (double t : {0.01, 0.05, 0.5}) {
        const double envelope = std::pow((s2 - s1) / (2.0 * M_E * t), (s2 - s1) / 2.0);
        for (std::size_t k = 0; k < basis->size(); ++k) {
            const double lam = basis->lambda(k);
            CHECK(std::pow(lam, (s2 - s1) / 2.0) * std::exp(-lam * t)
                  <= envelope * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("fractional powers") {
    auto basis = laplacian(5);
    std::mt19937 rng(3);
    const SpectralField u = random_field(basis, rng);
    CHECK(h_norm(apply_fractional(u, 0.0) - u) == 0.0);
    CHECK(apply_fractional(SpectralField::unit(basis, 0), 2.0).coeffs[0]
          == Catch::Approx(M_PI * M_PI));
    const SpectralField roundtrip = apply_fractional(apply_fractional(u, 0.7), -0.7);
    CHECK(h_norm(roundtrip - u) < 1e-14 * h_norm(u));
}

TEST_CASE("projection") {
    auto basis = laplacian(3);
    const SpectralField u(basis, {1.0, 2.0, 3.0});
    CHECK(h_norm(project(u, 3) - u) == 0.0);

    const SpectralField p = project(u, 2);
    REQUIRE(p.size() == 2);
    CHECK(p.coeffs[0] == 1.0);
    CHECK(p.coeffs[1] == 2.0);
    CHECK_THROWS(project(u, 4));

    // Pythagoras: |pi_m u|^2 + |(I - pi_m) u|^2 = |u|^2
    const double head = h_norm(p) * h_norm(p);
    const double tail = 3.0 * 3.0;
    CHECK(head + tail == Catch::Approx(h_norm(u) * h_norm(u)));
    CHECK(h_norm(p) <= h_norm(u));
}
