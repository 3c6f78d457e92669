#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "integrator.hpp"
#include "model.hpp"
#include "noise.hpp"
#include "spectral.hpp"

namespace slowfast {

/// Time/replica budget for ergodic estimation of the averaged drift.
/// Default burn-in targets a mixing error of 1e-2 of the initial offset
/// under the e^{-theta t/4} decay envelope.
struct ErgodicBudget {
    double burn_in = 0.0;  // 0 -> derive from theta
    double horizon = 0.0;
    std::size_t replicas = 8;
    double dt = 1e-3;

    static double default_burn_in(double theta) { return 8.0 / theta * std::log(10.0); }
};

/// Exact Gaussian average of an affine-in-y F1 over the closed-form
/// invariant law: Fbar1(x) = f1(x) + B1 * invariant_mean(x).
inline SpectralField fbar_closed_form(const ModelSpec& model, const SpectralField& x) {
    if (!model.closed_form_fbar)
        throw std::invalid_argument("fbar_closed_form: model has no closed-form averaged drift");
    return (*model.closed_form_fbar)(x);
}

struct FbarEstimate {
    SpectralField value;
    double stderr_norm = 0.0;  // H-norm standard error over replicas
};

/// Ergodic estimator of Fbar1(x): time average of F1(x, Y_s) along frozen
/// paths past burn-in, averaged over independent replicas.
inline FbarEstimate fbar_ergodic(const ModelSpec& model, const SpectralField& x,
                                 ErgodicBudget budget, std::uint64_t master_seed,
                                 std::uint64_t replica_base = 0) {
    const double theta = model.coefficients.profile.theta;
    if (!(theta > 0.0)) throw std::invalid_argument("fbar_ergodic: theta must be positive");
    if (budget.burn_in <= 0.0) budget.burn_in = ErgodicBudget::default_burn_in(theta);
    if (!(budget.horizon > budget.burn_in))
        throw std::invalid_argument("fbar_ergodic: burn-in exceeds horizon");

    const std::size_t m = x.size();
    SimConfig fcfg;
    fcfg.m = m;
    fcfg.dt = budget.dt;
    fcfg.T = budget.horizon;
    fcfg.scheme = model.fast_affine ? Scheme::ExactOuFast : Scheme::ExpEuler;
    fcfg.master_seed = master_seed;
    fcfg.micro_substeps = 1;

    const std::size_t skip =
        static_cast<std::size_t>(std::ceil(budget.burn_in / budget.dt));
    std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
    const SpectralField y0 = SpectralField::zero(model.basis);
    for (std::size_t r = 0; r < budget.replicas; ++r) {
        NoiseStream w2(master_seed, replica_base + r, EquationTag::W2);
        TrajectoryEnsemble path = simulate_frozen(x, y0, fcfg, model, w2);
        std::vector<double> acc(m, 0.0);
        std::size_t count = 0;
        SpectralField y = y0;
        for (std::size_t j = skip; j < path.times.size(); ++j) {
            for (std::size_t k = 0; k < m; ++k) y.coeffs[k] = path.at(0, j, k);
            const SpectralField f = model.coefficients.F1(x, y);
            for (std::size_t k = 0; k < m; ++k) acc[k] += f.coeffs[k];
            ++count;
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double mean = acc[k] / static_cast<double>(count);
            sum[k] += mean;
            sumsq[k] += mean * mean;
        }
    }

    const double R = static_cast<double>(budget.replicas);
    FbarEstimate out{SpectralField::zero(model.basis), 0.0};
    double var_total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double mean = sum[k] / R;
        out.value.coeffs[k] = mean;
        if (budget.replicas > 1) {
            const double var = std::max(0.0, (sumsq[k] - R * mean * mean) / (R - 1.0));
            var_total += var / R;
        }
    }
    out.stderr_norm = std::sqrt(var_total);
    return out;
}

/// Approximately-stationary draws from the invariant measure of the frozen
/// equation: exact Gaussian sampling when the closed form is available,
/// otherwise frozen-path thinning after burn-in with spacing >= 4/theta.
inline std::vector<SpectralField> sample_invariant(const ModelSpec& model, const SpectralField& x,
                                                   std::size_t n, std::uint64_t master_seed) {
    const double theta = model.coefficients.profile.theta;
    if (!(theta > 0.0)) throw std::invalid_argument("sample_invariant: theta must be positive");
    const std::size_t m = x.size();
    std::vector<SpectralField> draws;
    draws.reserve(n);

    if (model.closed_form_invariant) {
        const auto& law = *model.closed_form_invariant;
        const SpectralField mu = law.mean(x);
        NoiseStream stream(master_seed, 0, EquationTag::W2, 1);
        for (std::size_t i = 0; i < n; ++i) {
            SpectralField z = SpectralField::zero(model.basis);
            for (std::size_t k = 0; k < m; ++k)
                z.coeffs[k] = mu.coeffs[k]
                            + std::sqrt(law.variances[k])
                              * stream.normal(i, static_cast<std::uint32_t>(k));
            draws.push_back(std::move(z));
        }
        return draws;
    }

    const double spacing = 4.0 / theta;
    const double burn_in = ErgodicBudget::default_burn_in(theta);
    SimConfig fcfg;
    fcfg.m = m;
    fcfg.dt = std::min(1e-3, spacing / 8.0);
    fcfg.scheme = Scheme::ExpEuler;
    fcfg.micro_substeps = 1;
    fcfg.master_seed = master_seed;
    const std::size_t stride = static_cast<std::size_t>(std::ceil(spacing / fcfg.dt));
    const std::size_t skip = static_cast<std::size_t>(std::ceil(burn_in / fcfg.dt));
    fcfg.T = (skip + n * stride + 1) * fcfg.dt;
    fcfg.record_every = 1;
    NoiseStream w2(master_seed, 0, EquationTag::W2, 2);
    TrajectoryEnsemble path = simulate_frozen(x, SpectralField::zero(model.basis), fcfg, model, w2);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = skip + (i + 1) * stride;
        SpectralField z = SpectralField::zero(model.basis);
        for (std::size_t k = 0; k < m; ++k) z.coeffs[k] = path.at(0, j, k);
        draws.push_back(std::move(z));
    }
    return draws;
}

struct MixingFit {
    double exponent = 0.0;   // fitted slope of log|P_t phi(y) - mu(phi)| vs t
    double intercept = 0.0;  // log prefactor
    double ci_halfwidth = 0.0;
    bool censored = false;   // signal fell below the Monte Carlo noise floor
    std::size_t points_used = 0;

    double prefactor() const { return std::exp(intercept); }
};

/// Fits the decay exponent of |P_t phi(y0) - mu(phi)| over the lag grid.
/// Lags whose signal is within 3 standard errors of zero are censored.
inline MixingFit mixing_rate(const ModelSpec& model, const SpectralField& x,
                             const std::function<double(const SpectralField&)>& probe,
                             const std::vector<double>& lag_grid, const SpectralField& y0,
                             std::size_t replicas, std::uint64_t master_seed,
                             double mu_phi, double dt = 1e-3) {
    const std::size_t m = x.size();
    SimConfig fcfg;
    fcfg.m = m;
    fcfg.dt = dt;
    fcfg.T = lag_grid.back();
    fcfg.scheme = model.fast_affine ? Scheme::ExactOuFast : Scheme::ExpEuler;
    fcfg.micro_substeps = 1;
    fcfg.master_seed = master_seed;

    std::vector<std::size_t> idx(lag_grid.size());
    for (std::size_t i = 0; i < lag_grid.size(); ++i)
        idx[i] = static_cast<std::size_t>(std::llround(lag_grid[i] / dt));

    std::vector<double> sum(lag_grid.size(), 0.0), sumsq(lag_grid.size(), 0.0);
    SpectralField y = y0;
    for (std::size_t r = 0; r < replicas; ++r) {
        NoiseStream w2(master_seed, r, EquationTag::W2, 3);
        TrajectoryEnsemble path = simulate_frozen(x, y0, fcfg, model, w2);
        for (std::size_t i = 0; i < lag_grid.size(); ++i) {
            for (std::size_t k = 0; k < m; ++k) y.coeffs[k] = path.at(0, idx[i], k);
            const double v = probe(y);
            sum[i] += v;
            sumsq[i] += v * v;
        }
    }

    const double R = static_cast<double>(replicas);
    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < lag_grid.size(); ++i) {
        const double mean = sum[i] / R;
        const double var = std::max(0.0, (sumsq[i] - R * mean * mean) / (R - 1.0));
        const double se = std::sqrt(var / R);
        const double signal = std::abs(mean - mu_phi);
        if (signal > 3.0 * se && signal > 0.0) {
            ts.push_back(lag_grid[i]);
            logs.push_back(std::log(signal));
        }
    }

    MixingFit fit;
    fit.points_used = ts.size();
    if (ts.size() < 2) {
        fit.censored = true;
        return fit;
    }
    // ordinary least squares of log signal on t
    const double n = static_cast<double>(ts.size());
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sl += logs[i];
        stt += ts[i] * ts[i];
        stl += ts[i] * logs[i];
    }
    const double denom = n * stt - st * st;
    fit.exponent = (n * stl - st * sl) / denom;
    fit.intercept = (sl - fit.exponent * st) / n;
    if (ts.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double resid = logs[i] - (fit.intercept + fit.exponent * ts[i]);
            rss += resid * resid;
        }
        const double s2 = rss / (n - 2.0);
        fit.ci_halfwidth = 1.96 * std::sqrt(n * s2 / denom);
    }
    return fit;
}

}  // namespace slowfast
