#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "noise.hpp"
#include "spectral.hpp"

namespace slowfast {

/// Declared assumption constants for a coefficient quadruple. Constants are
/// declared by the model author, not inferred; estimate_lipschitz is an
/// audit, not a derivation.
struct AssumptionProfile {
    double L_F2 = 0.0;   // Lipschitz constant of F2 in y
    double L_G2 = 0.0;   // Lipschitz constant of G2 in y
    double theta = 0.0;  // 2*lambda_1 - 2*L_F2 - L_G2^2
    double gamma = 0.5;
    double zeta = 0.5;
    double delta = 0.75;
    double alpha = 0.5;
    double beta = 0.9;
    double kappa = 0.75;
    bool satisfies_A4 = false;
    bool satisfies_A5 = false;
};

/// theta = 2*lambda_1 - 2*L_F2 - L_G2^2; the strong dissipativity condition
/// requires theta > 0.
inline std::pair<double, bool> check_dissipativity(const AssumptionProfile& profile, double lambda1) {
    const double theta = 2.0 * lambda1 - 2.0 * profile.L_F2 - profile.L_G2 * profile.L_G2;
    return {theta, theta > 0.0};
}

using FieldMap2 = std::function<SpectralField(const SpectralField&, const SpectralField&)>;
/// Diagonal diffusion operator in the eigenbasis: per-mode multipliers g_k,
/// so (G dW)_k = g_k dW_k and |G|_HS^2 = sum g_k^2.
using DiagonalOp = std::vector<double>;
using DiffusionMap1 = std::function<DiagonalOp(const SpectralField&)>;
using DiffusionMap2 = std::function<DiagonalOp(const SpectralField&, const SpectralField&)>;

struct CoefficientSet {
    FieldMap2 F1;
    FieldMap2 F2;
    DiffusionMap1 G1;
    DiffusionMap2 G2;
    AssumptionProfile profile;
};

/// Affine-in-y structure of the fast drift: F2(x,y) = -c*y + forcing(x) with
/// constant diagonal G2. Enables exact per-mode OU transitions and the
/// closed-form invariant measure.
struct FastAffine {
    double c = 0.0;                                        // damping rate
    std::function<SpectralField(const SpectralField&)> forcing;
    DiagonalOp g2;                                         // constant diffusion multipliers
};

/// Per-mode Gaussian law: y_k ~ N(mean(x)_k, variance_k), modes independent.
struct GaussianInvariant {
    std::function<SpectralField(const SpectralField&)> mean;
    std::vector<double> variances;
};

struct ModelSpec {
    std::string name;
    std::shared_ptr<const SpectralBasis> basis;
    CoefficientSet coefficients;
    std::optional<FastAffine> fast_affine;
    std::optional<GaussianInvariant> closed_form_invariant;
    std::optional<std::function<SpectralField(const SpectralField&)>> closed_form_fbar;
    // Affine-in-y slow drift F1(x,y) = f1(x) + B1*y, when it has that form.
    std::optional<std::function<SpectralField(const SpectralField&)>> f1_part;
    std::optional<DiagonalOp> b1_diag;
    // Constant G1 admits the exact stochastic-convolution variance in the
    // slow update; x-dependent G1 falls back to left-point evaluation.
    bool g1_constant = true;
};

/// Nemytskii operator: spectral coefficients of xi -> f(x(xi), y(xi)) in the
/// Dirichlet sine basis e_k = sqrt(2) sin(k pi xi), by composite midpoint
/// quadrature on (0,1). Deterministic for fixed node count.
inline SpectralField nemytskii(const std::function<double(double, double)>& f,
                               const SpectralField& x, const SpectralField& y,
                               std::size_t nodes = 4096) {
    const std::size_t m = x.size();
    std::vector<double> out(m, 0.0);
    const double h = 1.0 / static_cast<double>(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double xi = (static_cast<double>(j) + 0.5) * h;
        double xv = 0.0, yv = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double e = std::sqrt(2.0) * std::sin(static_cast<double>(k + 1) * M_PI * xi);
            xv += x.coeffs[k] * e;
            yv += y.coeffs[k] * e;
        }
        const double fv = f(xv, yv);
        for (std::size_t k = 0; k < m; ++k)
            out[k] += fv * std::sqrt(2.0) * std::sin(static_cast<double>(k + 1) * M_PI * xi) * h;
    }
    return SpectralField(x.basis, std::move(out));
}

/// Numerical audit of the declared Lipschitz constant in y: max of
/// |F(x,y1)-F(x,y2)|/|y1-y2| over sampled pairs. A lower bound on the true
/// constant.
inline double estimate_lipschitz(const FieldMap2& F,
                                 const std::function<SpectralField(std::uint64_t)>& sampler,
                                 std::size_t n_pairs) {
    if (n_pairs < 1) throw std::invalid_argument("estimate_lipschitz: n_pairs must be >= 1");
    double best = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const SpectralField x = sampler(3 * i);
        const SpectralField y1 = sampler(3 * i + 1);
        const SpectralField y2 = sampler(3 * i + 2);
        const double denom = h_norm(y1 - y2);
        if (denom == 0.0) continue;  // degenerate pair
        best = std::max(best, h_norm(F(x, y1) - F(x, y2)) / denom);
    }
    return best;
}

namespace detail {

inline double param(const std::map<std::string, double>& params, const std::string& key,
                    double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

// Shared skeleton for the built-in models: diagonal B1, B2, constant diagonal
// G1 = diag(sqrt(a_k)), G2 = diag(sqrt(q_k)), fast damping c. The fast
// forcing is B2*x ("linear-ou"), tanh(B2*x) componentwise ("bounded-a4"), or
// the sine Nemytskii field ("nemytskii-sin").
inline ModelSpec build_diagonal_model(const std::string& name, std::size_t m,
                                      const std::map<std::string, double>& params) {
    auto basis = std::make_shared<const SpectralBasis>(SpectralBasis::laplacian(m));
    const double c = param(params, "c", 1.0);
    const double q_pow = param(params, "q_pow", -2.0);   // q_k = lambda_k^{q_pow}
    const double a_pow = param(params, "a_pow", -2.0);   // a_k = lambda_k^{a_pow}
    const double b1_scale = param(params, "b1_scale", 1.0);  // B1 = diag(b1_scale/k)
    const double b2_scale = param(params, "b2_scale", 1.0);  // B2 = diag(b2_scale/k)
    const double a_scale = param(params, "a_scale", 1.0);    // a_k = (a_scale lambda_k^{a_pow/2})^2
    const double q_scale = param(params, "q_scale", 1.0);

    DiagonalOp g1(m), g2(m), b1(m), b2(m);
    for (std::size_t k = 0; k < m; ++k) {
        g1[k] = a_scale * std::pow(basis->lambda(k), a_pow / 2.0);
        g2[k] = q_scale * std::pow(basis->lambda(k), q_pow / 2.0);
        b1[k] = b1_scale / static_cast<double>(k + 1);
        b2[k] = b2_scale / static_cast<double>(k + 1);
    }

    const bool nem = (name == "nemytskii-sin");
    const bool bounded = (name == "bounded-a4");

    std::function<SpectralField(const SpectralField&)> forcing;
    if (nem) {
        forcing = [](const SpectralField& x) {
            return nemytskii([](double a, double) { return std::sin(a); }, x,
                             SpectralField::zero(x.basis));
        };
    } else if (bounded) {
        forcing = [b2](const SpectralField& x) {
            SpectralField r = x;
            for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] = std::tanh(b2[k] * x.coeffs[k]);
            return r;
        };
    } else {
        forcing = [b2](const SpectralField& x) {
            SpectralField r = x;
            for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] = b2[k] * x.coeffs[k];
            return r;
        };
    }

    ModelSpec spec;
    spec.name = name;
    spec.basis = basis;

    spec.fast_affine = FastAffine{c, forcing, g2};

    spec.coefficients.F2 = [c, forcing](const SpectralField& x, const SpectralField& y) {
        SpectralField r = forcing(x);
        for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] -= c * y.coeffs[k];
        return r;
    };
    spec.coefficients.G2 = [g2](const SpectralField&, const SpectralField&) { return g2; };
    spec.coefficients.G1 = [g1](const SpectralField&) { return g1; };

    // Slow drift F1(x,y) = f1(x) + B1*y; the f1 part is the Nemytskii sine
    // field for "nemytskii-sin" (B1 = identity there per the y(xi) term) and
    // zero otherwise.
    std::function<SpectralField(const SpectralField&)> f1_part;
    DiagonalOp b1_eff = b1;
    if (nem) {
        f1_part = forcing;  // same sin(x(xi)) field
        std::fill(b1_eff.begin(), b1_eff.end(), 1.0);
    } else {
        f1_part = [](const SpectralField& x) { return SpectralField::zero(x.basis); };
    }
    spec.f1_part = f1_part;
    spec.b1_diag = b1_eff;
    spec.coefficients.F1 = [f1_part, b1_eff](const SpectralField& x, const SpectralField& y) {
        SpectralField r = f1_part(x);
        for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] += b1_eff[k] * y.coeffs[k];
        return r;
    };

    // Frozen equation per mode is an OU process with rate lambda_k + c.
    std::vector<double> vars(m);
    for (std::size_t k = 0; k < m; ++k)
        vars[k] = g2[k] * g2[k] / (2.0 * (basis->lambda(k) + c));
    auto inv_mean = [basis, c, forcing](const SpectralField& x) {
        SpectralField r = forcing(x);
        for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] /= basis->lambda(k) + c;
        return r;
    };
    spec.closed_form_invariant = GaussianInvariant{inv_mean, vars};
    spec.closed_form_fbar = [f1_part, b1_eff, inv_mean](const SpectralField& x) {
        SpectralField r = f1_part(x);
        const SpectralField mu = inv_mean(x);
        for (std::size_t k = 0; k < r.size(); ++k) r.coeffs[k] += b1_eff[k] * mu.coeffs[k];
        return r;
    };

    AssumptionProfile& p = spec.coefficients.profile;
    p.L_F2 = c;
    p.L_G2 = 0.0;
    p.theta = 2.0 * basis->lambda(0) - 2.0 * c;
    p.satisfies_A4 = bounded;
    p.satisfies_A5 = true;  // G1 constant diagonal with sum lambda_k a_k < inf for a_pow <= -2

    if (!(p.theta > 0.0))
        throw std::invalid_argument("builtin_model: parameters violate strong dissipativity (theta <= 0)");
    return spec;
}

}  // namespace detail

inline ModelSpec builtin_model(const std::string& name, std::size_t m,
                               const std::map<std::string, double>& params = {}) {
    if (name != "linear-ou" && name != "nemytskii-sin" && name != "bounded-a4")
        throw std::invalid_argument("builtin_model: unknown model '" + name + "'");
    return detail::build_diagonal_model(name, m, params);
}

}  // namespace slowfast
