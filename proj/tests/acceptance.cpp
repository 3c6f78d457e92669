// Acceptance harness: one pass/fail line per criterion, exit code = number of
// failures. Heavy Monte Carlo settings mirror the shipped experiment configs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/experiments.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/io.hpp"
#include "slowfast/model.hpp"
#include "slowfast/poisson.hpp"

using namespace slowfast;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%2d] %-28s %s  (%s)\n", idx, name.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void report_error(int idx, const std::string& name, const std::exception& e) {
    report(idx, name, false, std::string("exception: ") + e.what());
}

SimConfig strong_config() {
    SimConfig cfg;
    cfg.m = 16;
    cfg.dt = 2.5e-4;
    cfg.T = 0.5;
    cfg.samples = 2000;
    cfg.scheme = Scheme::ExactOuFast;
    cfg.master_seed = 2024;
    return cfg;
}

std::vector<double> eps_grid() {
    std::vector<double> eps;
    for (int e = 4; e <= 9; ++e) eps.push_back(std::ldexp(1.0, -e));
    return eps;
}

std::string fit_detail(const RateExperimentResult& res) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "slope=%.3f CI+-%.3f R2=%.4f bias=%.3f dropped=%zu",
                  res.fit.slope, res.fit.slope_ci_halfwidth, res.fit.r_squared,
                  res.doubling_bias, res.knee_dropped);
    return buf;
}

double g_bias_strong = -1.0, g_bias_sup = -1.0, g_bias_weak = -1.0;

// 1. strong order 1/2, linear-ou
void criterion_strong() {
    const char* name = "strong-rate linear-ou";
    try {
        const ModelSpec model = builtin_model("linear-ou", 16);
        const SpectralField x0 = default_initial_x(model.basis);
        const SpectralField y0 = SpectralField::zero(model.basis);
        const SimConfig cfg = strong_config();
        const auto res = run_rate_experiment(cfg, eps_grid(), [&](const SimConfig& c) {
            return strong_error(model, c, c.epsilon, x0, y0);
        });
        g_bias_strong = res.doubling_bias;
        const bool ok = res.fit.slope >= 0.40 && res.fit.slope <= 0.60
                     && res.fit.r_squared >= 0.98;
        report(1, name, ok, fit_detail(res));
    } catch (const std::exception& e) {
        report_error(1, name, e);
    }
}

// 2. strong order with sup inside the expectation, bounded-a4
void criterion_strong_sup() {
    const char* name = "strong-sup-rate bounded-a4";
    try {
        const ModelSpec model = builtin_model("bounded-a4", 16);
        const SpectralField x0 = default_initial_x(model.basis);
        const SpectralField y0 = SpectralField::zero(model.basis);
        const SimConfig cfg = strong_config();
        bool dominance = true;
        const auto res = run_rate_experiment(cfg, eps_grid(), [&](const SimConfig& c) {
            return strong_sup_error(model, c, c.epsilon, x0, y0);
        });
        g_bias_sup = res.doubling_bias;
        for (const auto& p : res.points) {
            const ErrorEstimate outside = strong_error(model, cfg, p.epsilon, x0, y0);
            if (p.error < outside.error) dominance = false;
        }
        const bool ok = res.fit.slope >= 0.40 && res.fit.slope <= 0.60
                     && res.fit.r_squared >= 0.98 && dominance;
        report(2, name, ok, fit_detail(res) + (dominance ? " sup>=outside" : " sup<outside"));
    } catch (const std::exception& e) {
        report_error(2, name, e);
    }
}

// 3. weak order 1, linear-ou, phi = cos<e1,.>, grid-max coupled metric
void criterion_weak() {
    const char* name = "weak-rate linear-ou";
    try {
        const ModelSpec model = builtin_model("linear-ou", 16);
        const SpectralField x0 = default_initial_x(model.basis);
        const SpectralField y0 = SpectralField::zero(model.basis);
        const SpectralField v = SpectralField::unit(model.basis, 0);
        SimConfig cfg = strong_config();
        cfg.dt = 3.125e-5;
        cfg.samples = 20000;
        cfg.record_every = 80;
        const auto phi = [](const SpectralField& u) { return std::cos(u.coeffs[0]); };
        const auto exact = [&](double t) { return weak_oracle_cos(model, x0, v, t); };
        double worst_gap_ratio = 0.0;
        const auto res = run_rate_experiment(cfg, eps_grid(), [&](const SimConfig& c) {
            const WeakErrorResult w =
                weak_error(model, c, c.epsilon, x0, y0, phi, exact, /*all_times=*/true);
            if (w.bar_gap.stderr_ > 0.0)
                worst_gap_ratio = std::max(worst_gap_ratio, w.bar_gap.error / w.bar_gap.stderr_);
            return w.coupled;
        });
        g_bias_weak = res.doubling_bias;
        const bool ok = res.fit.slope >= 0.80 && res.fit.slope <= 1.20
                     && res.fit.r_squared >= 0.95 && worst_gap_ratio <= 5.0;
        char extra[64];
        std::snprintf(extra, sizeof(extra), " oracle-gap=%.1fse", worst_gap_ratio);
        report(3, name, ok, fit_detail(res) + extra);
    } catch (const std::exception& e) {
        report_error(3, name, e);
    }
}

// 4. frozen-equation pathwise contraction at rate lambda_1 + c
void criterion_contraction() {
    const char* name = "frozen contraction";
    try {
        const double c = 1.0;
        const ModelSpec model = builtin_model("linear-ou", 16, {{"c", c}});
        const double target = -(model.basis->lambda(0) + c);
        SimConfig cfg;
        cfg.m = 16;
        cfg.dt = 1e-3;
        cfg.T = 0.2;
        double worst = 0.0;
        std::mt19937 rng(4);
        std::normal_distribution<double> normal;
        for (int trial = 0; trial < 10; ++trial) {
            SpectralField x = SpectralField::zero(model.basis);
            SpectralField y1 = SpectralField::zero(model.basis);
            SpectralField y2 = SpectralField::zero(model.basis);
            for (std::size_t k = 0; k < 16; ++k) {
                x.coeffs[k] = normal(rng);
                y1.coeffs[k] = normal(rng);
                y2.coeffs[k] = normal(rng);
            }
            NoiseStream w2(100 + trial, 0, EquationTag::W2);
            const TrajectoryEnsemble a = simulate_frozen(x, y1, cfg, model, w2);
            const TrajectoryEnsemble b = simulate_frozen(x, y2, cfg, model, w2);
            const double d0 = std::abs(a.at(0, 0, 0) - b.at(0, 0, 0));
            const std::size_t last = a.times.size() - 1;
            const double d1 = std::abs(a.at(0, last, 0) - b.at(0, last, 0));
            const double exponent = std::log(d1 / d0) / (a.times[last] - a.times[0]);
            worst = std::max(worst, std::abs(exponent - target) / std::abs(target));
        }
        char detail[96];
        std::snprintf(detail, sizeof(detail), "max rel dev %.2g%% of %.3f", worst * 100.0,
                      target);
        report(4, name, worst <= 0.05, detail);
    } catch (const std::exception& e) {
        report_error(4, name, e);
    }
}

// 5. exponential mixing within the theta/4 envelope
void criterion_mixing() {
    const char* name = "frozen mixing envelope";
    try {
        bool ok = true;
        std::string detail;
        for (const char* mn : {"linear-ou", "bounded-a4"}) {
            const ModelSpec model = builtin_model(mn, 16);
            const double theta = model.coefficients.profile.theta;
            const SpectralField x = default_initial_x(model.basis);
            const SpectralField mean = model.closed_form_invariant->mean(x);
            const SpectralField y0 = mean + SpectralField::unit(model.basis, 0);
            const auto probe = [](const SpectralField& u) { return u.coeffs[0]; };
            std::vector<double> lags;
            for (double t = 0.05; t <= 0.5001; t += 0.05) lags.push_back(t);
            const MixingFit fit = mixing_rate(model, x, probe, lags, y0, 2000, 5, mean.coeffs[0]);
            const bool this_ok = !fit.censored && fit.exponent <= -theta / 4.0;
            ok = ok && this_ok;
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%s%s: %.2f<=%.2f", detail.empty() ? "" : " ", mn,
                          fit.exponent, -theta / 4.0);
            detail += buf;
        }
        report(5, name, ok, detail);
    } catch (const std::exception& e) {
        report_error(5, name, e);
    }
}

// 6. ergodic averaged-drift estimator vs closed form
void criterion_fbar() {
    const char* name = "averaged-drift oracle";
    try {
        const ModelSpec model = builtin_model("linear-ou", 16);
        std::size_t pass = 0, total = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            std::mt19937 rng(900 + seed);
            std::normal_distribution<double> normal;
            for (int i = 0; i < 10; ++i) {
                SpectralField x = SpectralField::zero(model.basis);
                for (double& ck : x.coeffs) ck = normal(rng);
                ErgodicBudget budget;
                budget.horizon = 4.0;
                budget.replicas = 8;
                const FbarEstimate est =
                    fbar_ergodic(model, x, budget, seed, static_cast<std::uint64_t>(i) * 64);
                const double err = h_norm(est.value - fbar_closed_form(model, x));
                ++total;
                if (err <= 3.0 * est.stderr_norm) ++pass;
            }
        }
        char detail[64];
        std::snprintf(detail, sizeof(detail), "%zu/%zu within 3 stderr", pass, total);
        report(6, name, pass * 100 >= total * 95, detail);
    } catch (const std::exception& e) {
        report_error(6, name, e);
    }
}

// 7. Poisson generator identity along frozen paths
void criterion_generator() {
    const char* name = "poisson generator identity";
    try {
        const ModelSpec model = builtin_model("linear-ou", 16);
        const SpectralField x = default_initial_x(model.basis);
        const SpectralField mean = model.closed_form_invariant->mean(x);
        const SpectralField y = mean + SpectralField::unit(model.basis, 0);
        std::vector<double> grid;
        for (int j = 0; j <= 20; ++j) grid.push_back(1e-3 * j);
        const GeneratorCheckResult res = generator_identity_check(model, x, y, grid, 100000, 7);
        char detail[96];
        std::snprintf(detail, sizeof(detail), "residual=%.3g budget=%.3g%s", res.max_residual,
                      res.max_budget, res.grid_too_coarse ? " coarse-grid" : "");
        report(7, name, !res.grid_too_coarse && res.max_residual <= res.max_budget, detail);
    } catch (const std::exception& e) {
        report_error(7, name, e);
    }
}

// 8. corrector linear-growth ratio stable in the mode count
void criterion_phi_stability() {
    const char* name = "corrector m-stability";
    try {
        double ratio[2] = {0.0, 0.0};
        const std::size_t ms[2] = {16, 32};
        for (int i = 0; i < 2; ++i) {
            const ModelSpec model = builtin_model("linear-ou", ms[i]);
            const SpectralField base_x = default_initial_x(model.basis);
            std::vector<std::pair<SpectralField, SpectralField>> grid;
            for (double a : {0.0, 0.5, 1.0, 2.0}) {
                const SpectralField x = a * base_x;
                const SpectralField mean = model.closed_form_invariant->mean(x);
                for (double b : {-2.0, -0.5, 0.5, 2.0})
                    grid.emplace_back(x, mean + b * SpectralField::unit(model.basis, 0)
                                              + 0.5 * b * base_x);
            }
            ratio[i] = phi_bound_probe(model, grid).sup_ratio;
        }
        const double change = std::abs(ratio[1] - ratio[0]) / ratio[0];
        char detail[96];
        std::snprintf(detail, sizeof(detail), "m=16: %.5g m=32: %.5g change %.2f%%", ratio[0],
                      ratio[1], change * 100.0);
        report(8, name, change < 0.10, detail);
    } catch (const std::exception& e) {
        report_error(8, name, e);
    }
}

// 9. Galerkin refinement toward the m=64 reference
void criterion_galerkin() {
    const char* name = "galerkin refinement";
    try {
        SimConfig cfg = strong_config();
        cfg.samples = 200;
        cfg.epsilon = 1.0 / 16.0;
        const auto init_x = [](std::shared_ptr<const SpectralBasis> b) {
            return default_initial_x(std::move(b));
        };
        const auto init_y = [](std::shared_ptr<const SpectralBasis> b) {
            return SpectralField::zero(std::move(b));
        };
        const auto rows =
            galerkin_refinement("linear-ou", {}, cfg, {8, 16, 32}, 64, init_x, init_y);
        bool ok = true;
        std::string detail;
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& row : rows) {
            ok = ok && row.distance < prev && row.distance <= row.tail_bound;
            prev = row.distance;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "m=%zu %.3g<=%.3g ", row.m, row.distance,
                          row.tail_bound);
            detail += buf;
        }
        report(9, name, ok, detail);
    } catch (const std::exception& e) {
        report_error(9, name, e);
    }
}

// 10. byte-identical CSV output across thread counts
void criterion_determinism() {
    const char* name = "thread determinism";
    try {
        const ModelSpec model = builtin_model("linear-ou", 16);
        const SpectralField x0 = default_initial_x(model.basis);
        const SpectralField y0 = SpectralField::zero(model.basis);
        SimConfig cfg;
        cfg.m = 16;
        cfg.dt = 1e-3;
        cfg.T = 0.05;
        cfg.samples = 64;
        cfg.epsilon = 0.25;
        cfg.master_seed = 11;
        std::vector<std::string> csv;
        for (unsigned threads : {1u, 2u, 5u}) {
            cfg.threads = threads;
            const TrajectoryEnsemble ens = simulate_coupled(x0, y0, cfg, model);
            const std::string path = "acceptance_det_" + std::to_string(threads) + ".csv";
            write_trajectory_csv(path, ens);
            std::ifstream in(path, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            csv.push_back(ss.str());
        }
        // and the rate artifact pipeline
        std::vector<std::string> rate_csv;
        for (unsigned threads : {1u, 4u}) {
            SimConfig rc = cfg;
            rc.threads = threads;
            rc.samples = 100;
            std::vector<RatePoint> pts;
            for (double e : {0.25, 0.125}) {
                const ErrorEstimate est = strong_error(model, rc, e, x0, y0);
                pts.push_back({e, est.error, est.stderr_});
            }
            const std::string path = "acceptance_rate_" + std::to_string(threads) + ".csv";
            write_rate_csv(path, pts, rc.samples, rc.dt, rc.m, rc.master_seed);
            std::ifstream in(path, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            rate_csv.push_back(ss.str());
        }
        const bool ok = csv[0] == csv[1] && csv[0] == csv[2] && rate_csv[0] == rate_csv[1]
                     && !csv[0].empty() && !rate_csv[0].empty();
        report(10, name, ok, "trajectory + rate CSVs, threads {1,2,5} and {1,4}");
    } catch (const std::exception& e) {
        report_error(10, name, e);
    }
}

// 11. discretization guard at the smallest epsilon (harness-enforced)
void criterion_guard() {
    const char* name = "discretization guard";
    const bool ok = g_bias_strong >= 0.0 && g_bias_strong <= 0.1
                 && g_bias_sup >= 0.0 && g_bias_sup <= 0.1
                 && g_bias_weak >= 0.0 && g_bias_weak <= 0.1;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "biases: strong=%.3f sup=%.3f weak=%.3f",
                  g_bias_strong, g_bias_sup, g_bias_weak);
    report(11, name, ok, detail);
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    criterion_strong();
    criterion_strong_sup();
    criterion_weak();
    criterion_contraction();
    criterion_mixing();
    criterion_fbar();
    criterion_generator();
    criterion_phi_stability();
    criterion_galerkin();
    criterion_determinism();
    criterion_guard();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d/11 criteria passed in %.0fs\n", 11 - g_failures, secs);
    return g_failures;
}
