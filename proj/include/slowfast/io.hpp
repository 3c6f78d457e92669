#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "integrator.hpp"
#include "rate_fit.hpp"

namespace slowfast {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// One row per (epsilon, error) point; byte-identical for identical inputs.
inline void write_rate_csv(const std::string& path, const std::vector<RatePoint>& points,
                           std::size_t n_samples, double dt, std::size_t m,
                           std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "epsilon,error,stderr,n_samples,dt,m,seed\n";
    for (const auto& p : points)
        out << format_double(p.epsilon) << ',' << format_double(p.error) << ','
            << format_double(p.stderr_) << ',' << n_samples << ',' << format_double(dt) << ','
            << m << ',' << seed << '\n';
}

inline void write_summary_json(const std::string& path, const RateFitResult& fit,
                               const nlohmann::json& config_echo,
                               const std::string& version = "slowfast-0.1.0") {
    nlohmann::json j;
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r_squared"] = fit.r_squared;
    j["slope_ci_halfwidth"] = fit.slope_ci_halfwidth;
    j["n_points"] = fit.points.size();
    j["n_excluded"] = fit.excluded.size();
    j["config"] = config_echo;
    j["version"] = version;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << '\n';
}

/// Binary trajectory dump: header (m, n_times, n_samples, seed as u64),
/// then row-major doubles in [sample][time][mode] order.
inline void write_trajectory_binary(const std::string& path, const TrajectoryEnsemble& ens) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const std::uint64_t header[4] = {ens.m, ens.times.size(), ens.n_samples, ens.master_seed};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(ens.times.data()),
              static_cast<std::streamsize>(ens.times.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ens.slow.data()),
              static_cast<std::streamsize>(ens.slow.size() * sizeof(double)));
}

inline TrajectoryEnsemble read_trajectory_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    TrajectoryEnsemble ens;
    ens.m = header[0];
    ens.times.resize(header[1]);
    ens.n_samples = header[2];
    ens.master_seed = header[3];
    in.read(reinterpret_cast<char*>(ens.times.data()),
            static_cast<std::streamsize>(ens.times.size() * sizeof(double)));
    ens.slow.resize(ens.n_samples * ens.times.size() * ens.m);
    in.read(reinterpret_cast<char*>(ens.slow.data()),
            static_cast<std::streamsize>(ens.slow.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated trajectory file " + path);
    return ens;
}

/// CSV trajectory dump for small runs: sample,time,mode_1..mode_m.
inline void write_trajectory_csv(const std::string& path, const TrajectoryEnsemble& ens) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "sample,time";
    for (std::size_t k = 0; k < ens.m; ++k) out << ",mode_" << (k + 1);
    out << '\n';
    for (std::size_t s = 0; s < ens.n_samples; ++s)
        for (std::size_t j = 0; j < ens.times.size(); ++j) {
            out << s << ',' << format_double(ens.times[j]);
            for (std::size_t k = 0; k < ens.m; ++k) out << ',' << format_double(ens.at(s, j, k));
            out << '\n';
        }
}

}  // namespace slowfast
