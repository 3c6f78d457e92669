#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "spectral.hpp"

namespace slowfast {

enum class Scheme { ExpEuler, ExactOuFast };

struct SimConfig {
    double epsilon = 1.0;
    std::size_t m = 16;
    double dt = 2.5e-4;       // macro step
    double T = 0.5;           // horizon
    Scheme scheme = Scheme::ExactOuFast;
    std::size_t micro_substeps = 1;  // fast-equation substeps per macro step
    std::size_t samples = 1;
    std::uint64_t master_seed = 0;
    std::size_t record_every = 1;    // thinning of the recorded grid
    unsigned threads = 1;

    std::size_t n_steps() const {
        return static_cast<std::size_t>(std::llround(T / dt));
    }

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("SimConfig: epsilon must be positive");
        if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("SimConfig: dt and T must be positive");
        if (samples < 1) throw std::invalid_argument("SimConfig: samples must be >= 1");
        if (micro_substeps < 1) throw std::invalid_argument("SimConfig: micro_substeps must be >= 1");
        if (scheme == Scheme::ExpEuler) {
            const double delta = dt / static_cast<double>(micro_substeps);
            if (delta / epsilon > 0.5 + 1e-12)
                throw std::invalid_argument(
                    "SimConfig: exp-euler requires micro step delta with delta/epsilon <= 0.5 "
                    "(got " + std::to_string(delta / epsilon) + ")");
        }
    }
};

struct SlowFastState {
    SpectralField X;
    SpectralField Y;
    double t = 0.0;
};

/// Grid times x samples x modes, slow component only unless record_fast is
/// set. Slot layout is fixed by the sample index, so fills commute.
struct TrajectoryEnsemble {
    std::vector<double> times;
    std::size_t n_samples = 0;
    std::size_t m = 0;
    std::uint64_t master_seed = 0;
    std::vector<double> slow;  // [sample][time][mode]
    std::vector<double> fast;  // empty unless recorded

    double at(std::size_t sample, std::size_t time, std::size_t mode) const {
        return slow[(sample * times.size() + time) * m + mode];
    }
    double fast_at(std::size_t sample, std::size_t time, std::size_t mode) const {
        return fast[(sample * times.size() + time) * m + mode];
    }
};

/// phi1(z) = (1 - e^{-z})/z with a series branch near zero.
inline double phi1(double z) {
    if (std::abs(z) < 1e-4) return 1.0 - z / 2.0 + z * z / 6.0;
    return -std::expm1(-z) / z;
}

namespace detail {

// Per-run tabulated per-mode coefficients of the exponential-Euler update.
struct StepTables {
    std::vector<double> decay_x;       // e^{-lambda_k dt}
    std::vector<double> drift_x;       // phi1(lambda_k dt) * dt
    std::vector<double> conv_std_x;    // exact convolution std for constant G1
    std::vector<double> decay_y;       // fast substep decay (scheme dependent)
    std::vector<double> drift_y;
    std::vector<double> noise_y;
    std::vector<double> mean_weight_y; // (1 - a_k) / (lambda_k + c), exact scheme

    static StepTables build(const ModelSpec& model, const SimConfig& cfg) {
        const auto& basis = *model.basis;
        const std::size_t m = basis.size();
        StepTables t;
        t.decay_x.resize(m);
        t.drift_x.resize(m);
        t.conv_std_x.resize(m);
        t.decay_y.resize(m);
        t.drift_y.resize(m);
        t.noise_y.resize(m);
        t.mean_weight_y.resize(m);
        const DiagonalOp g1 = model.coefficients.G1(SpectralField::zero(model.basis));
        const double delta = cfg.dt / static_cast<double>(cfg.micro_substeps);
        const double tau = delta / cfg.epsilon;  // fast-time substep
        for (std::size_t k = 0; k < m; ++k) {
            const double lam = basis.lambda(k);
            t.decay_x[k] = std::exp(-lam * cfg.dt);
            t.drift_x[k] = phi1(lam * cfg.dt) * cfg.dt;
            t.conv_std_x[k] = g1[k] * std::sqrt(-std::expm1(-2.0 * lam * cfg.dt) / (2.0 * lam));
            if (cfg.scheme == Scheme::ExactOuFast) {
                if (!model.fast_affine)
                    throw std::invalid_argument("exact-ou-fast requires an affine fast drift");
                const double rate = lam + model.fast_affine->c;
                const double a = std::exp(-rate * tau);
                t.decay_y[k] = a;
                t.mean_weight_y[k] = -std::expm1(-rate * tau) / rate;
                t.noise_y[k] = model.fast_affine->g2[k]
                             * std::sqrt(-std::expm1(-2.0 * rate * tau) / (2.0 * rate));
            } else {
                t.decay_y[k] = std::exp(-lam * tau);
                t.drift_y[k] = phi1(lam * tau) * tau;
            }
        }
        return t;
    }
};

inline void check_finite(const std::vector<double>& v, std::size_t step, const char* what) {
    for (double c : v)
        if (!std::isfinite(c))
            throw std::runtime_error(std::string("integrator: non-finite ") + what
                                     + " at step " + std::to_string(step));
}

}  // namespace detail

/// One macro step of the coupled slow-fast system: exponential Euler on the
/// mild formulation for X, and either exact per-mode OU transitions or
/// exponential-Euler substeps for Y. Deterministic given streams.
inline SlowFastState step_coupled(const SlowFastState& state, const SimConfig& cfg,
                                  const ModelSpec& model, const NoiseStream& w1,
                                  const NoiseStream& w2, std::size_t step,
                                  const detail::StepTables& tables) {
    const std::size_t m = state.X.size();
    const SpectralField f1 = model.coefficients.F1(state.X, state.Y);

    SlowFastState next = state;
    if (model.g1_constant) {
        for (std::size_t k = 0; k < m; ++k) {
            next.X.coeffs[k] = tables.decay_x[k] * state.X.coeffs[k]
                             + tables.drift_x[k] * f1.coeffs[k]
                             + tables.conv_std_x[k] * w1.normal(step, static_cast<std::uint32_t>(k));
        }
    } else {
        const DiagonalOp g1 = model.coefficients.G1(state.X);
        const double sqrt_dt = std::sqrt(cfg.dt);
        for (std::size_t k = 0; k < m; ++k) {
            next.X.coeffs[k] = tables.decay_x[k] * state.X.coeffs[k]
                             + tables.drift_x[k] * f1.coeffs[k]
                             + tables.decay_x[k] * g1[k] * sqrt_dt
                               * w1.normal(step, static_cast<std::uint32_t>(k));
        }
    }

    if (cfg.scheme == Scheme::ExactOuFast) {
        const SpectralField forcing = model.fast_affine->forcing(state.X);
        for (std::size_t sub = 0; sub < cfg.micro_substeps; ++sub) {
            const std::uint64_t micro = step * cfg.micro_substeps + sub;
            for (std::size_t k = 0; k < m; ++k) {
                next.Y.coeffs[k] = tables.decay_y[k] * next.Y.coeffs[k]
                                 + tables.mean_weight_y[k] * forcing.coeffs[k]
                                 + tables.noise_y[k] * w2.normal(micro, static_cast<std::uint32_t>(k));
            }
        }
    } else {
        const double tau = cfg.dt / static_cast<double>(cfg.micro_substeps) / cfg.epsilon;
        const double sqrt_tau = std::sqrt(tau);
        for (std::size_t sub = 0; sub < cfg.micro_substeps; ++sub) {
            const std::uint64_t micro = step * cfg.micro_substeps + sub;
            const SpectralField f2 = model.coefficients.F2(state.X, next.Y);
            const DiagonalOp g2 = model.coefficients.G2(state.X, next.Y);
            for (std::size_t k = 0; k < m; ++k) {
                next.Y.coeffs[k] = tables.decay_y[k] * next.Y.coeffs[k]
                                 + tables.drift_y[k] * f2.coeffs[k]
                                 + tables.decay_y[k] * g2[k] * sqrt_tau
                                   * w2.normal(micro, static_cast<std::uint32_t>(k));
            }
        }
    }

    detail::check_finite(next.X.coeffs, step, "slow state");
    detail::check_finite(next.Y.coeffs, step, "fast state");
    next.t = state.t + cfg.dt;
    return next;
}

inline std::vector<double> record_grid(const SimConfig& cfg) {
    std::vector<double> times;
    const std::size_t n = cfg.n_steps();
    times.push_back(0.0);
    for (std::size_t j = 1; j <= n; ++j)
        if (j % cfg.record_every == 0 || j == n)
            times.push_back(static_cast<double>(j) * cfg.dt);
    return times;
}

/// Ensemble simulation of the coupled system. Sample s uses streams
/// (master_seed, s, W1) and (master_seed, s, W2); rerunning with the same
/// config yields bitwise-identical output for any thread count.
inline TrajectoryEnsemble simulate_coupled(const SpectralField& x0, const SpectralField& y0,
                                           const SimConfig& cfg, const ModelSpec& model,
                                           bool record_fast = false) {
    cfg.validate();
    const auto tables = detail::StepTables::build(model, cfg);
    const std::size_t n = cfg.n_steps();
    TrajectoryEnsemble ens;
    ens.times = record_grid(cfg);
    ens.n_samples = cfg.samples;
    ens.m = x0.size();
    ens.master_seed = cfg.master_seed;
    ens.slow.resize(cfg.samples * ens.times.size() * ens.m);
    if (record_fast) ens.fast.resize(ens.slow.size());

    parallel_for(cfg.samples, cfg.threads, [&](std::size_t s) {
        try {
            NoiseStream w1(cfg.master_seed, s, EquationTag::W1);
            NoiseStream w2(cfg.master_seed, s, EquationTag::W2);
            SlowFastState state{x0, y0, 0.0};
            std::size_t slot = 0;
            auto record = [&](const SlowFastState& st) {
                double* out = &ens.slow[(s * ens.times.size() + slot) * ens.m];
                for (std::size_t k = 0; k < ens.m; ++k) out[k] = st.X.coeffs[k];
                if (record_fast) {
                    double* outf = &ens.fast[(s * ens.times.size() + slot) * ens.m];
                    for (std::size_t k = 0; k < ens.m; ++k) outf[k] = st.Y.coeffs[k];
                }
                ++slot;
            };
            record(state);
            for (std::size_t j = 0; j < n; ++j) {
                state = step_coupled(state, cfg, model, w1, w2, j, tables);
                if ((j + 1) % cfg.record_every == 0 || j + 1 == n) record(state);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("sample " + std::to_string(s) + ": " + e.what());
        }
    });
    return ens;
}

/// Frozen equation dY = [AY + F2(x,Y)]dt + G2(x,Y)dW2 with x held fixed and
/// no time-scale separation. Single path per stream; supports thinning.
inline TrajectoryEnsemble simulate_frozen(const SpectralField& x, const SpectralField& y0,
                                          const SimConfig& cfg, const ModelSpec& model,
                                          const NoiseStream& w2) {
    SimConfig fcfg = cfg;
    fcfg.epsilon = 1.0;
    fcfg.samples = 1;
    fcfg.validate();
    const std::size_t m = y0.size();
    const std::size_t n = fcfg.n_steps();
    const double delta = fcfg.dt / static_cast<double>(fcfg.micro_substeps);

    // Substep coefficients at fast time delta (epsilon = 1).
    std::vector<double> decay(m), drift(m), noise(m), mean_w(m);
    SpectralField forcing = SpectralField::zero(model.basis);
    const bool exact = fcfg.scheme == Scheme::ExactOuFast && model.fast_affine.has_value();
    if (exact) forcing = model.fast_affine->forcing(x);
    for (std::size_t k = 0; k < m; ++k) {
        const double lam = model.basis->lambda(k);
        if (exact) {
            const double rate = lam + model.fast_affine->c;
            decay[k] = std::exp(-rate * delta);
            mean_w[k] = -std::expm1(-rate * delta) / rate;
            noise[k] = model.fast_affine->g2[k]
                     * std::sqrt(-std::expm1(-2.0 * rate * delta) / (2.0 * rate));
        } else {
            decay[k] = std::exp(-lam * delta);
            drift[k] = phi1(lam * delta) * delta;
        }
    }

    TrajectoryEnsemble ens;
    ens.times = record_grid(fcfg);
    ens.n_samples = 1;
    ens.m = m;
    ens.master_seed = fcfg.master_seed;
    ens.slow.resize(ens.times.size() * m);

    SpectralField y = y0;
    std::size_t slot = 0;
    auto record = [&] {
        for (std::size_t k = 0; k < m; ++k) ens.slow[slot * m + k] = y.coeffs[k];
        ++slot;
    };
    record();
    const double sqrt_delta = std::sqrt(delta);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t sub = 0; sub < fcfg.micro_substeps; ++sub) {
            const std::uint64_t micro = j * fcfg.micro_substeps + sub;
            if (exact) {
                for (std::size_t k = 0; k < m; ++k)
                    y.coeffs[k] = decay[k] * y.coeffs[k] + mean_w[k] * forcing.coeffs[k]
                                + noise[k] * w2.normal(micro, static_cast<std::uint32_t>(k));
            } else {
                const SpectralField f2 = model.coefficients.F2(x, y);
                const DiagonalOp g2 = model.coefficients.G2(x, y);
                for (std::size_t k = 0; k < m; ++k)
                    y.coeffs[k] = decay[k] * y.coeffs[k] + drift[k] * f2.coeffs[k]
                                + decay[k] * g2[k] * sqrt_delta
                                  * w2.normal(micro, static_cast<std::uint32_t>(k));
            }
        }
        detail::check_finite(y.coeffs, j, "frozen state");
        if ((j + 1) % fcfg.record_every == 0 || j + 1 == n) record();
    }
    return ens;
}

/// Averaged equation dXbar = [A Xbar + Fbar1(Xbar)]dt + G1(Xbar)dW1 with the
/// same W1 stream ids as simulate_coupled for matching sample indices
/// (common-random-numbers coupling).
inline TrajectoryEnsemble simulate_averaged(
    const SpectralField& x0, const SimConfig& cfg, const ModelSpec& model,
    const std::function<SpectralField(const SpectralField&)>& fbar) {
    cfg.validate();
    const auto tables = detail::StepTables::build(model, cfg);
    const std::size_t n = cfg.n_steps();
    TrajectoryEnsemble ens;
    ens.times = record_grid(cfg);
    ens.n_samples = cfg.samples;
    ens.m = x0.size();
    ens.master_seed = cfg.master_seed;
    ens.slow.resize(cfg.samples * ens.times.size() * ens.m);

    parallel_for(cfg.samples, cfg.threads, [&](std::size_t s) {
        NoiseStream w1(cfg.master_seed, s, EquationTag::W1);
        SpectralField x = x0;
        std::size_t slot = 0;
        auto record = [&] {
            double* out = &ens.slow[(s * ens.times.size() + slot) * ens.m];
            for (std::size_t k = 0; k < ens.m; ++k) out[k] = x.coeffs[k];
            ++slot;
        };
        record();
        const double sqrt_dt = std::sqrt(cfg.dt);
        for (std::size_t j = 0; j < n; ++j) {
            const SpectralField f = fbar(x);
            if (model.g1_constant) {
                for (std::size_t k = 0; k < ens.m; ++k) {
                    x.coeffs[k] = tables.decay_x[k] * x.coeffs[k] + tables.drift_x[k] * f.coeffs[k]
                                + tables.conv_std_x[k] * w1.normal(j, static_cast<std::uint32_t>(k));
                }
            } else {
                const DiagonalOp g1 = model.coefficients.G1(x);
                for (std::size_t k = 0; k < ens.m; ++k) {
                    x.coeffs[k] = tables.decay_x[k] * x.coeffs[k] + tables.drift_x[k] * f.coeffs[k]
                                + tables.decay_x[k] * g1[k] * sqrt_dt
                                  * w1.normal(j, static_cast<std::uint32_t>(k));
                }
            }
            detail::check_finite(x.coeffs, j, "averaged state");
            if ((j + 1) % cfg.record_every == 0 || j + 1 == n) record();
        }
    });
    return ens;
}

}  // namespace slowfast
