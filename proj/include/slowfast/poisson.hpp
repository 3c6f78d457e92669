#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "averaging.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "spectral.hpp"

namespace slowfast {

/// Closed-form corrector for the affine built-ins: with F1(x,y) = f1(x)+B1 y
/// and per-mode OU fast dynamics at rate lambda_k + c,
///   Phi(x,y)_k = B1_k (y_k - mean_k(x)) / (lambda_k + c).
inline SpectralField phi_closed_form(const ModelSpec& model, const SpectralField& x,
                                     const SpectralField& y) {
    if (!model.b1_diag || !model.fast_affine || !model.closed_form_invariant)
        throw std::invalid_argument("phi_closed_form: model lacks the affine structure");
    const SpectralField mu = model.closed_form_invariant->mean(x);
    SpectralField phi = SpectralField::zero(model.basis);
    const double c = model.fast_affine->c;
    for (std::size_t k = 0; k < phi.size(); ++k)
        phi.coeffs[k] = (*model.b1_diag)[k] * (y.coeffs[k] - mu.coeffs[k])
                      / (model.basis->lambda(k) + c);
    return phi;
}

struct CorrectorEstimate {
    SpectralField value;
    double truncation_T = 0.0;
    std::size_t replicas = 0;
    double stderr_norm = 0.0;
    double tail_bound = 0.0;  // (4/theta) * C_mix * e^{-theta T/4}
};

/// Monte Carlo corrector Phi(x,y) = int_0^T [E F1(x, Y_t^{x,y}) - Fbar1(x)] dt
/// with trapezoid time quadrature on the frozen-path grid and replica-average
/// expectation. The analytic tail beyond T is reported from the exponential
/// mixing envelope with the measured prefactor.
inline CorrectorEstimate phi_estimate(const ModelSpec& model, const SpectralField& x,
                                      const SpectralField& y, double truncation_T,
                                      std::size_t replicas, std::uint64_t master_seed,
                                      double mixing_prefactor = 1.0, double dt = 1e-3) {
    const double theta = model.coefficients.profile.theta;
    if (!(theta > 0.0)) throw std::invalid_argument("phi_estimate: theta must be positive");
    if (truncation_T < 8.0 / theta)
        throw std::invalid_argument("phi_estimate: truncation_T below 8/theta");

    const std::size_t m = x.size();
    const SpectralField fbar = fbar_closed_form(model, x);
    SimConfig fcfg;
    fcfg.m = m;
    fcfg.dt = dt;
    fcfg.T = truncation_T;
    fcfg.scheme = model.fast_affine ? Scheme::ExactOuFast : Scheme::ExpEuler;
    fcfg.micro_substeps = 1;
    fcfg.master_seed = master_seed;

    std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
    SpectralField yt = y;
    for (std::size_t r = 0; r < replicas; ++r) {
        NoiseStream w2(master_seed, r, EquationTag::W2, 4);
        TrajectoryEnsemble path = simulate_frozen(x, y, fcfg, model, w2);
        std::vector<double> integral(m, 0.0);
        for (std::size_t j = 0; j < path.times.size(); ++j) {
            for (std::size_t k = 0; k < m; ++k) yt.coeffs[k] = path.at(0, j, k);
            const SpectralField f = model.coefficients.F1(x, yt);
            const bool edge = (j == 0 || j + 1 == path.times.size());
            const double w = (edge ? 0.5 : 1.0) * dt;
            for (std::size_t k = 0; k < m; ++k)
                integral[k] += w * (f.coeffs[k] - fbar.coeffs[k]);
        }
        for (std::size_t k = 0; k < m; ++k) {
            sum[k] += integral[k];
            sumsq[k] += integral[k] * integral[k];
        }
    }

    const double R = static_cast<double>(replicas);
    CorrectorEstimate est;
    est.value = SpectralField::zero(model.basis);
    est.truncation_T = truncation_T;
    est.replicas = replicas;
    double var_total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double mean = sum[k] / R;
        est.value.coeffs[k] = mean;
        if (replicas > 1) {
            const double var = std::max(0.0, (sumsq[k] - R * mean * mean) / (R - 1.0));
            var_total += var / R;
        }
    }
    est.stderr_norm = std::sqrt(var_total);
    est.tail_bound = 4.0 / theta * mixing_prefactor * std::exp(-theta * truncation_T / 4.0);
    return est;
}

struct GeneratorCheckResult {
    double max_residual = 0.0;  // max_t |d/dt E Phi(x,Y_t) + (E F1 - Fbar1)|
    double max_budget = 0.0;    // 3 * (propagated MC + finite-difference error)
    bool grid_too_coarse = false;
};

/// Semigroup form of the Poisson identity: along frozen paths,
///   d/dt E Phi(x, Y_t) = -(E F1(x, Y_t) - Fbar1(x)).
/// Both sides are estimated over `replicas` paths; the left side by central
/// differences on t_grid. Uses the closed-form Phi of the affine built-ins.
inline GeneratorCheckResult generator_identity_check(const ModelSpec& model,
                                                     const SpectralField& x,
                                                     const SpectralField& y,
                                                     const std::vector<double>& t_grid,
                                                     std::size_t replicas,
                                                     std::uint64_t master_seed) {
    const double theta = model.coefficients.profile.theta;
    const std::size_t m = x.size();
    const std::size_t nt = t_grid.size();
    if (nt < 3) throw std::invalid_argument("generator_identity_check: need >= 3 grid points");
    const double dt = t_grid[1] - t_grid[0];

    GeneratorCheckResult res;
    if (dt > 1.0 / (4.0 * theta)) res.grid_too_coarse = true;

    const SpectralField fbar = fbar_closed_form(model, x);
    SimConfig fcfg;
    fcfg.m = m;
    fcfg.dt = dt;
    fcfg.T = t_grid.back();
    fcfg.scheme = model.fast_affine ? Scheme::ExactOuFast : Scheme::ExpEuler;
    fcfg.micro_substeps = 1;
    fcfg.master_seed = master_seed;

    // accumulate E Phi and E F1 per (time, mode) with variances
    std::vector<double> phi_sum(nt * m, 0.0), phi_sq(nt * m, 0.0);
    std::vector<double> f_sum(nt * m, 0.0), f_sq(nt * m, 0.0);
    SpectralField yt = y;
    for (std::size_t r = 0; r < replicas; ++r) {
        NoiseStream w2(master_seed, r, EquationTag::W2, 5);
        TrajectoryEnsemble path = simulate_frozen(x, y, fcfg, model, w2);
        for (std::size_t j = 0; j < nt; ++j) {
            const std::size_t pj = static_cast<std::size_t>(std::llround(t_grid[j] / dt));
            for (std::size_t k = 0; k < m; ++k) yt.coeffs[k] = path.at(0, pj, k);
            const SpectralField phi = phi_closed_form(model, x, yt);
            const SpectralField f = model.coefficients.F1(x, yt);
            for (std::size_t k = 0; k < m; ++k) {
                phi_sum[j * m + k] += phi.coeffs[k];
                phi_sq[j * m + k] += phi.coeffs[k] * phi.coeffs[k];
                f_sum[j * m + k] += f.coeffs[k];
                f_sq[j * m + k] += f.coeffs[k] * f.coeffs[k];
            }
        }
    }

    const double R = static_cast<double>(replicas);
    auto mean_at = [&](const std::vector<double>& s, std::size_t j, std::size_t k) {
        return s[j * m + k] / R;
    };
    auto se_at = [&](const std::vector<double>& s, const std::vector<double>& sq, std::size_t j,
                     std::size_t k) {
        const double mu = s[j * m + k] / R;
        const double var = std::max(0.0, (sq[j * m + k] - R * mu * mu) / (R - 1.0));
        return std::sqrt(var / R);
    };

    for (std::size_t j = 1; j + 1 < nt; ++j) {
        double resid2 = 0.0, budget2 = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double ddt =
                (mean_at(phi_sum, j + 1, k) - mean_at(phi_sum, j - 1, k)) / (2.0 * dt);
            const double rhs = mean_at(f_sum, j, k) - fbar.coeffs[k];
            const double r = ddt + rhs;
            resid2 += r * r;

            const double se_fd = std::sqrt(se_at(phi_sum, phi_sq, j + 1, k) *
                                               se_at(phi_sum, phi_sq, j + 1, k) +
                                           se_at(phi_sum, phi_sq, j - 1, k) *
                                               se_at(phi_sum, phi_sq, j - 1, k)) /
                                 (2.0 * dt);
            const double se_rhs = se_at(f_sum, f_sq, j, k);
            // truncation of the central difference from the measured curvature
            const double curv = std::abs(mean_at(phi_sum, j + 1, k) -
                                         2.0 * mean_at(phi_sum, j, k) +
                                         mean_at(phi_sum, j - 1, k)) / (dt * dt);
            const double trunc = curv * dt / 6.0 * dt;  // |phi'''| dt^2/6 ~ curv' scale
            const double b = 3.0 * (se_fd + se_rhs + trunc);
            budget2 += b * b;
        }
        res.max_residual = std::max(res.max_residual, std::sqrt(resid2));
        res.max_budget = std::max(res.max_budget, std::sqrt(budget2));
    }
    return res;
}

struct PhiBoundProbe {
    double sup_ratio = 0.0;  // sup over the grid of |Phi| / (1 + |x| + |y|)
};

/// Empirical linear-growth bound of the corrector over a probe grid.
inline PhiBoundProbe phi_bound_probe(const ModelSpec& model,
                                     const std::vector<std::pair<SpectralField, SpectralField>>& grid) {
    if (grid.empty()) throw std::invalid_argument("phi_bound_probe: grid is empty");
    PhiBoundProbe out;
    for (const auto& [x, y] : grid) {
        const SpectralField phi = phi_closed_form(model, x, y);
        const double ratio = h_norm(phi) / (1.0 + h_norm(x) + h_norm(y));
        out.sup_ratio = std::max(out.sup_ratio, ratio);
    }
    return out;
}

}  // namespace slowfast
