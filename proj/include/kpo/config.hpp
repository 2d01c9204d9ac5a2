#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/experiments.hpp"
#include "kpo/units.hpp"

// Experiment configuration files.
//
// INI-style: `[section]` headers, `key = value` lines, `#` or `;` comments.
// Frequencies are given as f/2pi with an explicit unit suffix and converted to
// rad/ns once, here. Lists are comma-separated.
//
//   [experiment]  scenario
//   [model]       omega_p_over_2pi_ghz, chi_over_2pi_mhz, beta0_over_2pi_mhz,
//                 delta_over_2pi_mhz, delta0_over_2pi_mhz, kappa_over_2pi_khz
//   [control]     detuning_mode, dynamics, t_ramp_ns, t_gate_ns,
//                 omega_p_sweep_ghz, delta0_sweep_mhz, kappa_sweep_khz,
//                 rz_envelope_scale, rx_delta0_over_chi, rx_bracket
//   [numerics]    dt_fs, dim, tail_window_ns, sample_interval_ns, levels,
//                 convergence, convergence_tolerance, truncation_check, threads
//   [output]      wigner, wigner_extent, wigner_points

namespace kpo {

inline const std::vector<std::string>& known_scenarios() {
    static const std::vector<std::string> s{"cat-creation", "pump-sweep", "delta0-sweep", "rx-gate",
                                            "rz-gate",      "decay-study", "convergence", "wigner"};
    return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct RawValue {
    std::string text;
    int line;
};

inline double to_number(const std::string& key, const RawValue& v) {
    try {
        size_t used = 0;
        double x = std::stod(v.text, &used);
        if (trim(v.text.substr(used)).empty() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, v.line, "expected a number, got '" + v.text + "'");
}

inline std::vector<double> to_list(const std::string& key, const RawValue& v) {
    std::vector<double> out;
    std::stringstream ss(v.text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(key, {trim(item), v.line}));
    if (out.empty()) throw ConfigError(key, v.line, "empty list");
    return out;
}

inline bool to_bool(const std::string& key, const RawValue& v) {
    if (v.text == "true" || v.text == "yes" || v.text == "1") return true;
    if (v.text == "false" || v.text == "no" || v.text == "0") return false;
    throw ConfigError(key, v.line, "expected true or false, got '" + v.text + "'");
}

inline int to_int(const std::string& key, const RawValue& v) {
    double x = to_number(key, v);
    if (x != std::floor(x)) throw ConfigError(key, v.line, "expected an integer");
    return int(x);
}

inline const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"experiment", {"scenario"}},
        {"model",
         {"omega_p_over_2pi_ghz", "chi_over_2pi_mhz", "beta0_over_2pi_mhz", "delta_over_2pi_mhz",
          "delta0_over_2pi_mhz", "kappa_over_2pi_khz"}},
        {"control",
         {"detuning_mode", "dynamics", "t_ramp_ns", "t_gate_ns", "omega_p_sweep_ghz", "delta0_sweep_mhz",
          "kappa_sweep_khz", "rz_envelope_scale", "rx_delta0_over_chi", "rx_bracket"}},
        {"numerics",
         {"dt_fs", "dim", "tail_window_ns", "sample_interval_ns", "levels", "convergence", "convergence_tolerance",
          "truncation_check", "threads"}},
        {"output", {"wigner", "wigner_extent", "wigner_points"}},
    };
    return s;
}

}  // namespace detail

/// Parses and validates a configuration; errors name the key and line.
inline ExperimentConfig parse_config(std::istream& in) {
    std::map<std::string, detail::RawValue> raw;
    std::string section, line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", lineno, "malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!detail::schema().count(section)) throw ConfigError(section, lineno, "unknown section");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("", lineno, "expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError(key, lineno, "key outside of a section");
        if (!detail::schema().at(section).count(key)) throw ConfigError(key, lineno, "unknown key in [" + section + "]");
        if (raw.count(key)) throw ConfigError(key, lineno, "duplicate key");
        if (value.empty()) throw ConfigError(key, lineno, "missing value");
        raw[key] = {value, lineno};
    }

    ExperimentConfig cfg;
    auto has = [&](const char* k) { return raw.count(k) > 0; };
    auto num = [&](const char* k) { return detail::to_number(k, raw.at(k)); };
    auto positive = [&](const char* k) {
        double x = num(k);
        if (!(x > 0)) throw ConfigError(k, raw.at(k).line, "must be > 0");
        return x;
    };
    auto non_positive = [&](const char* k, double x) {
        if (x > 0) throw ConfigError(k, raw.at(k).line, "must be <= 0 (detunings are non-positive in this regime)");
        return x;
    };

    if (has("scenario")) {
        cfg.scenario = raw.at("scenario").text;
        const auto& s = known_scenarios();
        if (std::find(s.begin(), s.end(), cfg.scenario) == s.end())
            throw ConfigError("scenario", raw.at("scenario").line, "unknown scenario '" + cfg.scenario + "'");
    }
    if (has("omega_p_over_2pi_ghz")) cfg.omega_p = units::from_ghz(positive("omega_p_over_2pi_ghz"));
    if (has("chi_over_2pi_mhz")) cfg.chi = units::from_mhz(positive("chi_over_2pi_mhz"));
    if (has("beta0_over_2pi_mhz")) cfg.beta0 = units::from_mhz(positive("beta0_over_2pi_mhz"));
    if (has("delta_over_2pi_mhz"))
        cfg.delta = units::from_mhz(non_positive("delta_over_2pi_mhz", num("delta_over_2pi_mhz")));
    if (has("delta0_over_2pi_mhz"))
        cfg.delta0 = units::from_mhz(non_positive("delta0_over_2pi_mhz", num("delta0_over_2pi_mhz")));
    if (has("kappa_over_2pi_khz")) {
        double k = num("kappa_over_2pi_khz");
        if (k < 0) throw ConfigError("kappa_over_2pi_khz", raw.at("kappa_over_2pi_khz").line, "must be >= 0");
        cfg.kappa = units::from_khz(k);
    }

    if (has("detuning_mode")) {
        const auto& v = raw.at("detuning_mode");
        std::stringstream ss(v.text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (item == "constant") cfg.detuning_modes.push_back(DetuningMode::constant);
            else if (item == "linear-decay") cfg.detuning_modes.push_back(DetuningMode::linear_decay);
            else throw ConfigError("detuning_mode", v.line, "expected constant and/or linear-decay");
        }
        cfg.detuning_mode = cfg.detuning_modes.front();
        if (cfg.detuning_modes.size() == 1) cfg.detuning_modes.clear();
    }
    if (has("dynamics")) {
        const auto& v = raw.at("dynamics");
        if (v.text == "rwa") cfg.dynamics = Dynamics::rwa;
        else if (v.text == "nrot") cfg.dynamics = Dynamics::nrot;
        else throw ConfigError("dynamics", v.line, "expected rwa or nrot");
    }
    if (has("t_ramp_ns")) {
        cfg.ramp_times = detail::to_list("t_ramp_ns", raw.at("t_ramp_ns"));
        for (double T : cfg.ramp_times)
            if (!(T > 0)) throw ConfigError("t_ramp_ns", raw.at("t_ramp_ns").line, "ramp times must be > 0");
    }
    if (has("t_gate_ns")) cfg.gate_time = positive("t_gate_ns");
    if (has("omega_p_sweep_ghz")) {
        cfg.omega_p_values.clear();
        for (double f : detail::to_list("omega_p_sweep_ghz", raw.at("omega_p_sweep_ghz"))) {
            if (!(f > 0)) throw ConfigError("omega_p_sweep_ghz", raw.at("omega_p_sweep_ghz").line, "must be > 0");
            cfg.omega_p_values.push_back(units::from_ghz(f));
        }
    }
    if (has("delta0_sweep_mhz")) {
        cfg.delta0_values.clear();
        for (double f : detail::to_list("delta0_sweep_mhz", raw.at("delta0_sweep_mhz")))
            cfg.delta0_values.push_back(units::from_mhz(non_positive("delta0_sweep_mhz", f)));
    }
    if (has("kappa_sweep_khz")) {
        cfg.kappa_values.clear();
        for (double k : detail::to_list("kappa_sweep_khz", raw.at("kappa_sweep_khz"))) {
            if (k < 0) throw ConfigError("kappa_sweep_khz", raw.at("kappa_sweep_khz").line, "must be >= 0");
            cfg.kappa_values.push_back(units::from_khz(k));
        }
    }
    if (has("rz_envelope_scale")) cfg.rz_scale = num("rz_envelope_scale");
    if (has("rx_delta0_over_chi")) cfg.rx_delta0_over_chi = positive("rx_delta0_over_chi");
    if (has("rx_bracket")) {
        auto b = detail::to_list("rx_bracket", raw.at("rx_bracket"));
        if (b.size() != 2 || !(b[0] > 0) || !(b[1] > b[0]))
            throw ConfigError("rx_bracket", raw.at("rx_bracket").line, "expected two increasing positive numbers");
        cfg.rx_bracket_lo = b[0];
        cfg.rx_bracket_hi = b[1];
    }

    if (has("dt_fs")) cfg.dt = units::fs_to_ns(positive("dt_fs"));
    if (has("dim")) {
        cfg.dim = detail::to_int("dim", raw.at("dim"));
        if (cfg.dim < 2) throw ConfigError("dim", raw.at("dim").line, "must be >= 2");
    }
    if (has("tail_window_ns")) cfg.tail_window = positive("tail_window_ns");
    if (has("sample_interval_ns")) cfg.sample_interval = positive("sample_interval_ns");
    if (has("levels")) {
        cfg.levels = detail::to_int("levels", raw.at("levels"));
        if (cfg.levels < 2) throw ConfigError("levels", raw.at("levels").line, "must be >= 2");
    }
    if (has("convergence")) cfg.convergence = detail::to_bool("convergence", raw.at("convergence"));
    if (has("convergence_tolerance")) cfg.convergence_tolerance = positive("convergence_tolerance");
    if (has("truncation_check")) cfg.truncation_check = detail::to_bool("truncation_check", raw.at("truncation_check"));
    if (has("threads")) {
        cfg.threads = detail::to_int("threads", raw.at("threads"));
        if (cfg.threads < 1) throw ConfigError("threads", raw.at("threads").line, "must be >= 1");
    }

    if (has("wigner")) cfg.wigner_snapshots = detail::to_bool("wigner", raw.at("wigner"));
    if (has("wigner_extent")) {
        double e = positive("wigner_extent");
        cfg.wigner.x_min = cfg.wigner.p_min = -e;
        cfg.wigner.x_max = cfg.wigner.p_max = e;
    }
    if (has("wigner_points")) {
        int n = detail::to_int("wigner_points", raw.at("wigner_points"));
        if (n < 1) throw ConfigError("wigner_points", raw.at("wigner_points").line, "must be >= 1");
        cfg.wigner.nx = cfg.wigner.np = n;
    }
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", 0, "cannot open config file '" + path + "'");
    return parse_config(in);
}

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string join(const std::vector<double>& v, const std::function<double(double)>& f) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt17(f(v[i]));
    return s;
}

}  // namespace detail

/// Canonical config text for a resolved configuration; parse_config(render_config(c)) reproduces c.
inline std::string render_config(const ExperimentConfig& c) {
    using detail::fmt17;
    std::ostringstream o;
    o << "[experiment]\n";
    if (!c.scenario.empty()) o << "scenario = " << c.scenario << "\n";
    o << "\n[model]\n"
      << "omega_p_over_2pi_ghz = " << fmt17(units::to_ghz(c.omega_p)) << "\n"
      << "chi_over_2pi_mhz = " << fmt17(units::to_mhz(c.chi)) << "\n"
      << "beta0_over_2pi_mhz = " << fmt17(units::to_mhz(c.beta0)) << "\n"
      << "delta_over_2pi_mhz = " << fmt17(units::to_mhz(c.delta)) << "\n"
      << "delta0_over_2pi_mhz = " << fmt17(units::to_mhz(c.delta0)) << "\n"
      << "kappa_over_2pi_khz = " << fmt17(units::to_khz(c.kappa)) << "\n";
    o << "\n[control]\n"
      << "detuning_mode = ";
    {
        auto ms = c.modes();
        for (size_t i = 0; i < ms.size(); ++i) o << (i ? ", " : "") << to_string(ms[i]);
    }
    o << "\n"
      << "dynamics = " << to_string(c.dynamics) << "\n"
      << "t_ramp_ns = " << detail::join(c.ramp_times, [](double x) { return x; }) << "\n"
      << "t_gate_ns = " << fmt17(c.gate_time) << "\n";
    if (!c.omega_p_values.empty())
        o << "omega_p_sweep_ghz = " << detail::join(c.omega_p_values, units::to_ghz) << "\n";
    if (!c.delta0_values.empty()) o << "delta0_sweep_mhz = " << detail::join(c.delta0_values, units::to_mhz) << "\n";
    if (!c.kappa_values.empty()) o << "kappa_sweep_khz = " << detail::join(c.kappa_values, units::to_khz) << "\n";
    o << "rz_envelope_scale = " << fmt17(c.rz_scale) << "\n";
    if (c.rx_delta0_over_chi) o << "rx_delta0_over_chi = " << fmt17(*c.rx_delta0_over_chi) << "\n";
    o << "rx_bracket = " << fmt17(c.rx_bracket_lo) << ", " << fmt17(c.rx_bracket_hi) << "\n";
    o << "\n[numerics]\n";
    if (c.dt) o << "dt_fs = " << fmt17(units::ns_to_fs(*c.dt)) << "\n";
    o << "dim = " << c.dim << "\n"
      << "tail_window_ns = " << fmt17(c.tail_window) << "\n"
      << "sample_interval_ns = " << fmt17(c.sample_interval) << "\n"
      << "levels = " << c.levels << "\n"
      << "convergence = " << (c.convergence ? "true" : "false") << "\n"
      << "convergence_tolerance = " << fmt17(c.convergence_tolerance) << "\n"
      << "truncation_check = " << (c.truncation_check ? "true" : "false") << "\n"
      << "threads = " << c.threads << "\n";
    o << "\n[output]\n"
      << "wigner = " << (c.wigner_snapshots ? "true" : "false") << "\n"
      << "wigner_extent = " << fmt17(c.wigner.x_max) << "\n"
      << "wigner_points = " << c.wigner.nx << "\n";
    return o.str();
}

}  // namespace kpo
