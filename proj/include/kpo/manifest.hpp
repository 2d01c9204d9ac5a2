#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kpo/config.hpp"
#include "kpo/experiments.hpp"
#include "kpo/units.hpp"

// Run manifest: one JSON document per run tying every output file to the
// configuration hash, the resolved parameters and the numerical provenance.

namespace kpo {

struct RunManifest {
    std::string config_sha256;
    std::string scenario;
    ExperimentConfig config;
    std::string dt_source;  // "config", "command-line" or "scenario-default"
    std::vector<nlohmann::json> points;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> outputs;
    std::vector<std::string> failures;
    double wall_clock_s = 0.0;

    bool failed() const { return !failures.empty(); }

    void add_point(const std::string& series, const PointResult& p) {
        nlohmann::json j{{"series", series},
                         {"sweep_value", p.sweep_value},
                         {"dt_fs", units::ns_to_fs(p.dt)},
                         {"dim", p.dim},
                         {"convergence", to_string(p.convergence)},
                         {"convergence_diff", p.convergence_diff}};
        if (p.truncation_diff) j["truncation_diff"] = *p.truncation_diff;
        if (!p.ok()) {
            j["error"] = p.error;
            failures.push_back(series + " @ " + format_sweep(p.sweep_value) + ": " + p.error);
        } else if (p.convergence == ConvergenceStatus::not_converged) {
            failures.push_back(series + " @ " + format_sweep(p.sweep_value) + ": dt-halving convergence not reached");
        }
        points.push_back(std::move(j));
    }

    nlohmann::json to_json() const {
        const ExperimentConfig& c = config;
        nlohmann::json params{
            {"omega_p_rad_per_ns", c.omega_p},
            {"chi_rad_per_ns", c.chi},
            {"beta0_rad_per_ns", c.beta0},
            {"delta_rad_per_ns", c.delta},
            {"delta0_rad_per_ns", c.delta0},
            {"kappa_rad_per_ns", c.kappa},
            {"omega_p_over_2pi_ghz", units::to_ghz(c.omega_p)},
            {"chi_over_2pi_mhz", units::to_mhz(c.chi)},
            {"beta0_over_2pi_mhz", units::to_mhz(c.beta0)},
            {"delta_over_2pi_mhz", units::to_mhz(c.delta)},
            {"delta0_over_2pi_mhz", units::to_mhz(c.delta0)},
            {"kappa_over_2pi_khz", units::to_khz(c.kappa)},
            {"detuning_mode", to_string(c.detuning_mode)},
            {"dynamics", to_string(c.dynamics)},
            {"dt_fs", units::ns_to_fs(c.dt_for(c.dynamics))},
            {"dim", c.dim},
            {"tail_window_ns", c.tail_window},
            {"sample_interval_ns", c.sample_interval},
        };
        return nlohmann::json{
            {"config_sha256", config_sha256},
            {"scenario", scenario},
            {"status", failed() ? "failed" : "ok"},
            {"failures", failures},
            {"resolved_parameters", params},
            {"dt_source", dt_source},
            {"resolved_config", render_config(c)},
            {"points", points},
            {"summary", summary},
            {"outputs", outputs},
            {"wall_clock_s", wall_clock_s},
        };
    }

private:
    static std::string format_sweep(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%g", v);
        return buf;
    }
};

/// Recovers the resolved configuration stored in a manifest.
inline ExperimentConfig config_from_manifest(const nlohmann::json& manifest) {
    return parse_config_text(manifest.at("resolved_config").get<std::string>());
}

}  // namespace kpo
