#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "averaging.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rate_fit.hpp"
#include "spectral.hpp"

namespace slowfast {

enum class MetricKind { StrongSupOutside, StrongSupInside, Weak };

/// Per-mode law of the averaged equation for the diagonal built-ins with
/// f1 = 0: dXbar_k = -r_k Xbar_k dt + g1_k dW1_k with
/// r_k = lambda_k - B1_k B2_k / (lambda_k + c).
struct ModeLaw {
    double mean = 0.0;
    double variance = 0.0;
};

inline double averaged_mode_rate(const ModelSpec& model, std::size_t k) {
    const double lam = model.basis->lambda(k);
    const double c = model.fast_affine->c;
    const double b1 = (*model.b1_diag)[k];
    // effective linear feedback of the fast mean: forcing must be B2*x
    // (exact for "linear-ou"); callers own that precondition.
    SpectralField unit = SpectralField::unit(model.basis, k);
    const double b2 = model.fast_affine->forcing(unit).coeffs[k];
    return lam - b1 * b2 / (lam + c);
}

inline ModeLaw averaged_mode_law(const ModelSpec& model, const SpectralField& x0, std::size_t k,
                                 double t) {
    const double r = averaged_mode_rate(model, k);
    const double g1 = model.coefficients.G1(x0)[k];
    ModeLaw law;
    law.mean = std::exp(-r * t) * x0.coeffs[k];
    law.variance = g1 * g1 * -std::expm1(-2.0 * r * t) / (2.0 * r);
    return law;
}

/// Gaussian characteristic-function oracle for phi = cos<v, .> under the
/// averaged terminal law: E cos<v, Xbar_T> = e^{-v'Sv/2} cos(v'mu).
inline double weak_oracle_cos(const ModelSpec& model, const SpectralField& x0,
                              const SpectralField& v, double t) {
    double quad = 0.0, lin = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const ModeLaw law = averaged_mode_law(model, x0, k, t);
        quad += v.coeffs[k] * v.coeffs[k] * law.variance;
        lin += v.coeffs[k] * law.mean;
    }
    return std::exp(-quad / 2.0) * std::cos(lin);
}

/// One coupled + one averaged trajectory per sample, driven by the same W1
/// stream (common random numbers). Records squared pathwise differences
/// and/or test-functional values into sample-indexed slots.
struct PairedRunOutput {
    std::vector<double> times;
    std::size_t n_samples = 0;
    std::vector<double> diff2;    // [sample][time] |X^eps - Xbar|^2, if requested
    std::vector<double> phi_eps;  // [sample][time] phi(X^eps_t), if requested
    std::vector<double> phi_bar;  // [sample][time] phi(Xbar_t), if requested

    double diff2_at(std::size_t s, std::size_t j) const { return diff2[s * times.size() + j]; }
};

inline PairedRunOutput run_paired(const ModelSpec& model, const SimConfig& cfg,
                                  const SpectralField& x0, const SpectralField& y0,
                                  bool record_diff,
                                  const std::function<double(const SpectralField&)>* phi = nullptr) {
    cfg.validate();
    if (!model.closed_form_fbar)
        throw std::invalid_argument("run_paired: rate experiments require a closed-form averaged drift");
    if (!model.g1_constant)
        throw std::invalid_argument("run_paired: requires constant diagonal G1");
    const auto fbar = *model.closed_form_fbar;
    const auto tables = detail::StepTables::build(model, cfg);
    const std::size_t n = cfg.n_steps();
    const std::size_t m = x0.size();

    PairedRunOutput out;
    out.times = record_grid(cfg);
    out.n_samples = cfg.samples;
    const std::size_t nt = out.times.size();
    if (record_diff) out.diff2.assign(cfg.samples * nt, 0.0);
    if (phi) {
        out.phi_eps.assign(cfg.samples * nt, 0.0);
        out.phi_bar.assign(cfg.samples * nt, 0.0);
    }

    parallel_for(cfg.samples, cfg.threads, [&](std::size_t s) {
        NoiseStream w1(cfg.master_seed, s, EquationTag::W1);
        NoiseStream w2(cfg.master_seed, s, EquationTag::W2);
        SlowFastState state{x0, y0, 0.0};
        SpectralField xbar = x0;
        std::size_t slot = 0;
        auto record = [&] {
            if (record_diff) {
                double acc = 0.0;
                for (std::size_t k = m; k-- > 0;) {
                    const double d = state.X.coeffs[k] - xbar.coeffs[k];
                    acc += d * d;
                }
                out.diff2[s * nt + slot] = acc;
            }
            if (phi) {
                out.phi_eps[s * nt + slot] = (*phi)(state.X);
                out.phi_bar[s * nt + slot] = (*phi)(xbar);
            }
            ++slot;
        };
        record();
        for (std::size_t j = 0; j < n; ++j) {
            // shared W1 draws for the slow updates of both systems
            const SpectralField fb = fbar(xbar);
            SpectralField xbar_next = xbar;
            const SpectralField f1 = model.coefficients.F1(state.X, state.Y);
            SlowFastState next = state;
            for (std::size_t k = 0; k < m; ++k) {
                const double z = w1.normal(j, static_cast<std::uint32_t>(k));
                const double noise = tables.conv_std_x[k] * z;
                next.X.coeffs[k] = tables.decay_x[k] * state.X.coeffs[k]
                                 + tables.drift_x[k] * f1.coeffs[k] + noise;
                xbar_next.coeffs[k] = tables.decay_x[k] * xbar.coeffs[k]
                                    + tables.drift_x[k] * fb.coeffs[k] + noise;
            }
            if (cfg.scheme == Scheme::ExactOuFast) {
                const SpectralField forcing = model.fast_affine->forcing(state.X);
                for (std::size_t sub = 0; sub < cfg.micro_substeps; ++sub) {
                    const std::uint64_t micro = j * cfg.micro_substeps + sub;
                    for (std::size_t k = 0; k < m; ++k)
                        next.Y.coeffs[k] = tables.decay_y[k] * next.Y.coeffs[k]
                                         + tables.mean_weight_y[k] * forcing.coeffs[k]
                                         + tables.noise_y[k]
                                           * w2.normal(micro, static_cast<std::uint32_t>(k));
                }
            } else {
                const double tau = cfg.dt / static_cast<double>(cfg.micro_substeps) / cfg.epsilon;
                const double sqrt_tau = std::sqrt(tau);
                for (std::size_t sub = 0; sub < cfg.micro_substeps; ++sub) {
                    const std::uint64_t micro = j * cfg.micro_substeps + sub;
                    const SpectralField f2 = model.coefficients.F2(state.X, next.Y);
                    const DiagonalOp g2 = model.coefficients.G2(state.X, next.Y);
                    for (std::size_t k = 0; k < m; ++k)
                        next.Y.coeffs[k] = tables.decay_y[k] * next.Y.coeffs[k]
                                         + tables.drift_y[k] * f2.coeffs[k]
                                         + tables.decay_y[k] * g2[k] * sqrt_tau
                                           * w2.normal(micro, static_cast<std::uint32_t>(k));
                }
            }
            detail::check_finite(next.X.coeffs, j, "slow state");
            detail::check_finite(next.Y.coeffs, j, "fast state");
            state = next;
            xbar = xbar_next;
            if ((j + 1) % cfg.record_every == 0 || j + 1 == n) record();
        }
    });
    return out;
}

struct ErrorEstimate {
    double error = 0.0;
    double stderr_ = 0.0;
};

namespace detail {

constexpr std::size_t n_batches = 10;

// Batch reduction of a per-sample curve statistic. `per_time` controls the
// metric order: sup over times of batch means (sup outside) vs batch means
// of per-sample sups (sup inside).
inline ErrorEstimate reduce_strong(const PairedRunOutput& out, double p, bool sup_inside) {
    const std::size_t nt = out.times.size();
    const std::size_t S = out.n_samples;
    const std::size_t B = std::min(n_batches, S);
    std::vector<double> batch_err(B, 0.0);

    if (sup_inside) {
        std::vector<double> batch_sum(B, 0.0);
        std::vector<std::size_t> batch_count(B, 0);
        for (std::size_t s = 0; s < S; ++s) {
            double sup = 0.0;
            for (std::size_t j = 0; j < nt; ++j) sup = std::max(sup, out.diff2_at(s, j));
            const std::size_t b = s * B / S;
            batch_sum[b] += std::pow(sup, p / 2.0);
            batch_count[b]++;
        }
        for (std::size_t b = 0; b < B; ++b)
            batch_err[b] = std::pow(batch_sum[b] / static_cast<double>(batch_count[b]), 1.0 / p);
    } else {
        std::vector<double> batch_sum(B * nt, 0.0);
        std::vector<std::size_t> batch_count(B, 0);
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t b = s * B / S;
            for (std::size_t j = 0; j < nt; ++j)
                batch_sum[b * nt + j] += std::pow(out.diff2_at(s, j), p / 2.0);
            batch_count[b]++;
        }
        for (std::size_t b = 0; b < B; ++b) {
            double sup = 0.0;
            for (std::size_t j = 0; j < nt; ++j)
                sup = std::max(sup, batch_sum[b * nt + j] / static_cast<double>(batch_count[b]));
            batch_err[b] = std::pow(sup, 1.0 / p);
        }
    }

    ErrorEstimate est;
    double mean = 0.0;
    for (double e : batch_err) mean += e;
    mean /= static_cast<double>(B);
    // pooled estimate: recompute over all samples for the point value
    if (sup_inside) {
        double acc = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double sup = 0.0;
            for (std::size_t j = 0; j < nt; ++j) sup = std::max(sup, out.diff2_at(s, j));
            acc += std::pow(sup, p / 2.0);
        }
        est.error = std::pow(acc / static_cast<double>(S), 1.0 / p);
    } else {
        double best = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
            double acc = 0.0;
            for (std::size_t s = 0; s < S; ++s) acc += std::pow(out.diff2_at(s, j), p / 2.0);
            best = std::max(best, acc / static_cast<double>(S));
        }
        est.error = std::pow(best, 1.0 / p);
    }
    double var = 0.0;
    for (double e : batch_err) var += (e - mean) * (e - mean);
    var /= static_cast<double>(B - 1);
    est.stderr_ = std::sqrt(var / static_cast<double>(B));
    return est;
}

}  // namespace detail

/// sup_t (E|X^eps_t - Xbar_t|^p)^{1/p} over the recorded grid.
inline ErrorEstimate strong_error(const ModelSpec& model, SimConfig cfg, double epsilon,
                                  const SpectralField& x0, const SpectralField& y0,
                                  double p = 2.0) {
    cfg.epsilon = epsilon;
    const PairedRunOutput out = run_paired(model, cfg, x0, y0, /*record_diff=*/true);
    return detail::reduce_strong(out, p, /*sup_inside=*/false);
}

/// (E sup_t |X^eps_t - Xbar_t|^p)^{1/p}. Intended for models declaring A4;
/// other models run with a warning upstream.
inline ErrorEstimate strong_sup_error(const ModelSpec& model, SimConfig cfg, double epsilon,
                                      const SpectralField& x0, const SpectralField& y0,
                                      double p = 2.0) {
    cfg.epsilon = epsilon;
    const PairedRunOutput out = run_paired(model, cfg, x0, y0, /*record_diff=*/true);
    return detail::reduce_strong(out, p, /*sup_inside=*/true);
}

struct WeakErrorResult {
    ErrorEstimate oracle;   // |E phi(X^eps_T) - exact E phi(Xbar_T)|
    ErrorEstimate coupled;  // |E[phi(X^eps_T) - phi(Xbar_T)]|, variance reduced
    ErrorEstimate bar_gap;  // terminal |E phi(Xbar_T) - exact|, oracle validation
};

/// Weak error at the terminal time (or the grid max with all_times). The
/// coupled-difference estimator shares every W1 draw between the two systems
/// and is the primary rate metric: the plain sample mean of phi(X^eps) has a
/// Monte Carlo floor far above the epsilon-bias for well-mixed phi. The
/// oracle enters twice: as the uncoupled reference (oracle field) and as a
/// consistency check on the simulated averaged equation (bar_gap field).
inline WeakErrorResult weak_error(const ModelSpec& model, SimConfig cfg, double epsilon,
                                  const SpectralField& x0, const SpectralField& y0,
                                  const std::function<double(const SpectralField&)>& phi,
                                  const std::function<double(double)>& exact_phi_bar,
                                  bool all_times = false) {
    cfg.epsilon = epsilon;
    if (!all_times) cfg.record_every = std::max<std::size_t>(cfg.record_every, cfg.n_steps());
    const PairedRunOutput out = run_paired(model, cfg, x0, y0, /*record_diff=*/false, &phi);
    const std::size_t nt = out.times.size();
    const std::size_t S = out.n_samples;

    WeakErrorResult res;
    for (std::size_t j = all_times ? 1 : nt - 1; j < nt; ++j) {
        double se = 0.0, sd = 0.0, sb = 0.0, se2 = 0.0, sd2 = 0.0, sb2 = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const double pe = out.phi_eps[s * nt + j];
            const double pb = out.phi_bar[s * nt + j];
            const double d = pe - pb;
            se += pe;
            se2 += pe * pe;
            sd += d;
            sd2 += d * d;
            sb += pb;
            sb2 += pb * pb;
        }
        const double n = static_cast<double>(S);
        const double mean_eps = se / n;
        const double mean_diff = sd / n;
        const double var_eps = std::max(0.0, (se2 - n * mean_eps * mean_eps) / (n - 1.0));
        const double var_diff = std::max(0.0, (sd2 - n * mean_diff * mean_diff) / (n - 1.0));
        const double t = out.times[j];
        const double err_o = std::abs(mean_eps - exact_phi_bar(t));
        const double err_c = std::abs(mean_diff);
        if (err_o >= res.oracle.error) {
            res.oracle.error = err_o;
            res.oracle.stderr_ = std::sqrt(var_eps / n);
        }
        if (err_c >= res.coupled.error) {
            res.coupled.error = err_c;
            res.coupled.stderr_ = std::sqrt(var_diff / n);
        }
        if (j == nt - 1) {
            const double mean_bar = sb / n;
            const double var_bar = std::max(0.0, (sb2 - n * mean_bar * mean_bar) / (n - 1.0));
            res.bar_gap.error = std::abs(mean_bar - exact_phi_bar(t));
            res.bar_gap.stderr_ = std::sqrt(var_bar / n);
        }
    }
    return res;
}

/// Time-discretization bias control: reruns the metric with dt/2 and doubled
/// substeps and returns |err(dt) - err(dt/2)| / err(dt/2). Rate runs require
/// <= 0.1 at the smallest epsilon.
template <typename MetricFn>
double doubling_test(SimConfig cfg, MetricFn&& metric) {
    const ErrorEstimate coarse = metric(cfg);
    SimConfig fine = cfg;
    fine.dt = cfg.dt / 2.0;
    fine.micro_substeps = cfg.micro_substeps * 2;
    fine.record_every = cfg.record_every * 2;
    const ErrorEstimate refined = metric(fine);
    if (refined.error <= 1e-300) return 0.0;  // 0/0 guard
    return std::abs(coarse.error - refined.error) / refined.error;
}

struct RateExperimentResult {
    std::vector<RatePoint> points;      // one per epsilon, largest first
    RateFitResult fit;
    double doubling_bias = 0.0;         // at the smallest epsilon
    bool guard_ok = false;
    std::size_t knee_dropped = 0;       // pre-asymptotic points excluded
};

namespace detail {

// Drop up to the two largest-epsilon points when their fit residual exceeds
// twice the RMS residual of the remaining points.
inline RateFitResult fit_with_knee_detection(std::vector<RatePoint> pts, std::size_t& dropped) {
    dropped = 0;
    std::sort(pts.begin(), pts.end(),
              [](const RatePoint& a, const RatePoint& b) { return a.epsilon > b.epsilon; });
    while (dropped < 2 && pts.size() > 4) {
        RateFitResult fit = fit_rate(pts);
        std::vector<double> resid;
        for (const auto& p : fit.points)
            resid.push_back(std::log2(p.error) - (fit.intercept + fit.slope * std::log2(p.epsilon)));
        // residual of the largest-epsilon point vs RMS of the rest
        double rms = 0.0;
        for (std::size_t i = 1; i < resid.size(); ++i) rms += resid[i] * resid[i];
        rms = std::sqrt(rms / static_cast<double>(resid.size() - 1));
        if (rms > 0.0 && std::abs(resid.front()) > 2.0 * rms) {
            pts.erase(pts.begin());
            ++dropped;
            continue;
        }
        return fit;
    }
    return fit_rate(pts);
}

}  // namespace detail

/// Full rate study over an epsilon grid: discretization guard at the
/// smallest epsilon, per-epsilon error estimates, knee-aware log-log fit.
template <typename MetricFn>
RateExperimentResult run_rate_experiment(SimConfig cfg, const std::vector<double>& eps_grid,
                                         MetricFn&& metric, double guard_threshold = 0.1) {
    if (eps_grid.empty()) throw std::invalid_argument("run_rate_experiment: empty epsilon grid");
    std::vector<double> eps = eps_grid;
    std::sort(eps.begin(), eps.end(), std::greater<double>());

    RateExperimentResult res;
    SimConfig guard_cfg = cfg;
    guard_cfg.epsilon = eps.back();
    res.doubling_bias = doubling_test(guard_cfg, [&](const SimConfig& c) { return metric(c); });
    res.guard_ok = res.doubling_bias <= guard_threshold;
    if (!res.guard_ok)
        throw std::runtime_error("run_rate_experiment: discretization guard failed (relative bias "
                                 + std::to_string(res.doubling_bias) + " > "
                                 + std::to_string(guard_threshold) + ")");

    for (double e : eps) {
        SimConfig c = cfg;
        c.epsilon = e;
        const ErrorEstimate est = metric(c);
        res.points.push_back({e, est.error, est.stderr_});
    }
    res.fit = detail::fit_with_knee_detection(res.points, res.knee_dropped);
    return res;
}

struct GalerkinRow {
    std::size_t m = 0;
    double distance = 0.0;    // E sup_t |X^{m,eps}_t - X^{M,eps}_t|^2
    double tail_bound = 0.0;  // 2x closed-form tail sum (affine models)
};

/// Per-mode closed-form sup over the grid of mean^2 + variance of the
/// averaged law, summed over the tail k > m.
inline double galerkin_tail_sum(const ModelSpec& model, const SpectralField& x0, std::size_t m,
                                const std::vector<double>& times) {
    double total = 0.0;
    for (std::size_t k = m; k < x0.size(); ++k) {
        double sup = 0.0;
        for (double t : times) {
            const ModeLaw law = averaged_mode_law(model, x0, k, t);
            sup = std::max(sup, law.mean * law.mean + law.variance);
        }
        total += sup;
    }
    return total;
}

/// Mode-refinement study: distances of the m-mode coupled ensembles to the
/// M-mode reference under common noise (mode k reuses the same draws for
/// every m >= k).
inline std::vector<GalerkinRow> galerkin_refinement(
    const std::string& model_name, const std::map<std::string, double>& params,
    const SimConfig& cfg, const std::vector<std::size_t>& m_grid, std::size_t M,
    const std::function<SpectralField(std::shared_ptr<const SpectralBasis>)>& initial_x,
    const std::function<SpectralField(std::shared_ptr<const SpectralBasis>)>& initial_y) {
    const ModelSpec ref_model = builtin_model(model_name, M, params);
    SimConfig ref_cfg = cfg;
    ref_cfg.m = M;
    const SpectralField x0 = initial_x(ref_model.basis);
    const SpectralField y0 = initial_y(ref_model.basis);
    const TrajectoryEnsemble ref = simulate_coupled(x0, y0, ref_cfg, ref_model);

    std::vector<GalerkinRow> rows;
    for (std::size_t m : m_grid) {
        if (m > M) throw std::invalid_argument("galerkin_refinement: m exceeds reference M");
        const ModelSpec model = builtin_model(model_name, m, params);
        SimConfig mc = cfg;
        mc.m = m;
        const SpectralField xm = initial_x(model.basis);
        const SpectralField ym = initial_y(model.basis);
        const TrajectoryEnsemble ens = simulate_coupled(xm, ym, mc, model);

        double acc = 0.0;
        for (std::size_t s = 0; s < cfg.samples; ++s) {
            double sup = 0.0;
            for (std::size_t j = 0; j < ref.times.size(); ++j) {
                double d2 = 0.0;
                for (std::size_t k = 0; k < M; ++k) {
                    const double a = k < m ? ens.at(s, j, k) : 0.0;
                    const double b = ref.at(s, j, k);
                    d2 += (a - b) * (a - b);
                }
                sup = std::max(sup, d2);
            }
            acc += sup;
        }
        GalerkinRow row;
        row.m = m;
        row.distance = acc / static_cast<double>(cfg.samples);
        if (ref_model.b1_diag && ref_model.fast_affine)
            row.tail_bound = 2.0 * galerkin_tail_sum(ref_model, x0, m, ref.times);
        rows.push_back(row);
    }
    return rows;
}

/// Default slow initial condition of the rate experiments: x_k = k^{-1.2}.
inline SpectralField default_initial_x(std::shared_ptr<const SpectralBasis> basis) {
    SpectralField x = SpectralField::zero(basis);
    for (std::size_t k = 0; k < x.size(); ++k)
        x.coeffs[k] = std::pow(static_cast<double>(k + 1), -1.2);
    return x;
}

}  // namespace slowfast
