#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "integrator.hpp"
#include "model.hpp"

namespace slowfast {

struct RunConfig {
    std::string command;  // simulate | rate-strong | rate-strong-sup | rate-weak |
                          // frozen-mixing | poisson-check | galerkin
    std::string model_name = "linear-ou";
    std::map<std::string, double> model_params;
    SimConfig sim;
    std::string output_dir = ".";
    std::string format = "both";  // csv | json | both

    // experiment section
    int eps_max_pow = 4;  // grid 2^{-eps_max_pow} .. 2^{-eps_min_pow}
    int eps_min_pow = 9;
    double p = 2.0;
    double guard_threshold = 0.1;
    std::vector<std::size_t> m_grid = {8, 16, 32};
    std::size_t m_ref = 64;
    bool all_times = false;

    std::vector<double> epsilon_grid() const {
        std::vector<double> eps;
        for (int e = eps_max_pow; e <= eps_min_pow; ++e) eps.push_back(std::ldexp(1.0, -e));
        return eps;
    }
};

namespace detail {

inline const std::set<std::string> known_keys = {
    "command",
    "model.name", "model.c", "model.q_pow", "model.a_pow", "model.b1_scale", "model.b2_scale",
    "model.a_scale", "model.q_scale",
    "sim.epsilon", "sim.m", "sim.dt", "sim.T", "sim.scheme", "sim.micro_substeps",
    "sim.samples", "sim.seed", "sim.record_every",
    "experiment.eps_max_pow", "experiment.eps_min_pow", "experiment.p",
    "experiment.guard_threshold", "experiment.m_grid", "experiment.m_ref",
    "experiment.all_times",
    "output.dir", "output.format",
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (!known_keys.count(key))
        throw std::invalid_argument("config: unknown key '" + key + "'");
    auto as_double = [&] {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("config: bad number for '" + key + "': " + value);
        return v;
    };
    auto as_size = [&] {
        const double v = as_double();
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw std::invalid_argument("config: '" + key + "' must be a nonnegative integer");
        return static_cast<std::size_t>(v);
    };

    if (key == "command") cfg.command = value;
    else if (key == "model.name") cfg.model_name = value;
    else if (key.rfind("model.", 0) == 0) cfg.model_params[key.substr(6)] = as_double();
    else if (key == "sim.epsilon") cfg.sim.epsilon = as_double();
    else if (key == "sim.m") cfg.sim.m = as_size();
    else if (key == "sim.dt") cfg.sim.dt = as_double();
    else if (key == "sim.T") cfg.sim.T = as_double();
    else if (key == "sim.scheme") {
        if (value == "exp-euler") cfg.sim.scheme = Scheme::ExpEuler;
        else if (value == "exact-ou-fast") cfg.sim.scheme = Scheme::ExactOuFast;
        else throw std::invalid_argument("config: unknown scheme '" + value + "'");
    }
    else if (key == "sim.micro_substeps") cfg.sim.micro_substeps = as_size();
    else if (key == "sim.samples") cfg.sim.samples = as_size();
    else if (key == "sim.seed") cfg.sim.master_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "sim.record_every") cfg.sim.record_every = as_size();
    else if (key == "experiment.eps_max_pow") cfg.eps_max_pow = static_cast<int>(as_size());
    else if (key == "experiment.eps_min_pow") cfg.eps_min_pow = static_cast<int>(as_size());
    else if (key == "experiment.p") cfg.p = as_double();
    else if (key == "experiment.guard_threshold") cfg.guard_threshold = as_double();
    else if (key == "experiment.m_grid") {
        cfg.m_grid.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            cfg.m_grid.push_back(static_cast<std::size_t>(std::stoull(detail::trim(tok))));
    }
    else if (key == "experiment.m_ref") cfg.m_ref = as_size();
    else if (key == "experiment.all_times") cfg.all_times = (value == "true" || value == "1");
    else if (key == "output.dir") cfg.output_dir = value;
    else if (key == "output.format") {
        if (value != "csv" && value != "json" && value != "both")
            throw std::invalid_argument("config: format must be csv, json or both");
        cfg.format = value;
    }
}

}  // namespace detail

/// INI-style config: sections per module, key = value lines, '#' comments.
/// Unknown keys are rejected so typos fail loudly.
inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno)
                                        + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        detail::apply_key(cfg, section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    return parse_config(in);
}

/// Command-line overrides "section.key=value"; they win over the file.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override '" + ov + "' is not key=value");
        detail::apply_key(cfg, detail::trim(ov.substr(0, eq)), detail::trim(ov.substr(eq + 1)));
    }
}

/// Parse-time validation: theta > 0 and positive sim parameters.
inline ModelSpec validate_and_build_model(const RunConfig& cfg) {
    cfg.sim.validate();
    ModelSpec model = builtin_model(cfg.model_name, cfg.sim.m, cfg.model_params);
    const auto [theta, ok] =
        check_dissipativity(model.coefficients.profile, model.basis->lambda(0));
    if (!ok)
        throw std::invalid_argument("config: model violates strong dissipativity (theta = "
                                    + std::to_string(theta) + ")");
    return model;
}

}  // namespace slowfast
