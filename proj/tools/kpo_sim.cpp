// kpo-sim: command-line front end for the parametron simulator.
//
//   kpo-sim <scenario> [--config FILE] [--out DIR] [--dt-fs F] [--dim N] [--threads N]
//   kpo-sim run <scenario> [same flags]
//
// Writes stats_*.csv, trajectory_*.csv, optional wigner_*.csv and manifest.json
// into the output directory. Exit status: 0 success, 1 a point failed to
// propagate or converge (partial outputs are kept), 2 invalid input.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include <CLI11.hpp>

#include "kpo/config.hpp"
#include "kpo/errors.hpp"
#include "kpo/experiments.hpp"
#include "kpo/manifest.hpp"
#include "kpo/output.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string scenario;
    std::string config_path;
    std::string out_dir = "kpo-out";
    double dt_fs = 0.0;
    int dim = 0;
    int threads = 0;
};

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw kpo::Error("SHA-256 digest failed");
    std::ostringstream o;
    for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return o.str();
}

std::string tag(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

class Writer {
public:
    Writer(fs::path dir, kpo::RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {}

    void file(const std::string& name, const std::string& content) {
        kpo::write_file((dir_ / name).string(), content);
        manifest_.outputs.push_back(name);
    }

    /// Stats table plus one trajectory file per point.
    void sweep(const kpo::SweepResult& s) {
        file("stats_" + s.series + ".csv", kpo::stats_csv(s.points));
        for (const auto& p : s.points) {
            manifest_.add_point(s.series, p);
            if (!p.trajectory.times.empty())
                file("trajectory_" + s.series + "_" + tag(p.sweep_value) + ".csv", kpo::trajectory_csv(p));
            for (const auto& w : p.wigner)
                file("wigner_" + s.series + "_" + tag(p.sweep_value) + "_t" + tag(w.time) + ".csv",
                     kpo::wigner_csv(w.grid));
        }
    }

private:
    fs::path dir_;
    kpo::RunManifest& manifest_;
};

void run_scenario(const std::string& scenario, const kpo::ExperimentConfig& cfg, Writer& out,
                  kpo::RunManifest& manifest) {
    using namespace kpo;
    auto per_mode = [&](auto&& fn) {
        for (DetuningMode m : cfg.modes()) {
            ExperimentConfig c = cfg;
            c.detuning_mode = m;
            c.detuning_modes.clear();
            fn(c);
        }
    };

    if (scenario == "cat-creation") {
        per_mode([&](const ExperimentConfig& c) { out.sweep(run_cat_creation(c)); });
    } else if (scenario == "wigner") {
        per_mode([&](ExperimentConfig c) {
            c.wigner_snapshots = true;
            out.sweep(run_cat_creation(c));
        });
    } else if (scenario == "convergence") {
        per_mode([&](ExperimentConfig c) {
            c.convergence = true;
            c.truncation_check = true;
            SweepResult s = run_cat_creation(c);
            std::string table = "sweep_value,dt_fs,dim,convergence_diff,truncation_diff,converged\n";
            for (const auto& p : s.points)
                table += format_number(p.sweep_value) + "," + format_number(units::ns_to_fs(p.dt)) + "," +
                         std::to_string(p.dim) + "," + format_number(p.convergence_diff) + "," +
                         (p.truncation_diff ? format_number(*p.truncation_diff) : std::string()) + "," +
                         (p.ok() ? to_string(p.convergence) : "failed") + "\n";
            out.file("convergence_" + s.series + ".csv", table);
            out.sweep(s);
        });
    } else if (scenario == "pump-sweep") {
        if (cfg.omega_p_values.empty()) throw ConfigError("omega_p_sweep_ghz", 0, "pump-sweep needs a sweep list");
        per_mode([&](const ExperimentConfig& c) {
            for (const auto& s : run_pump_frequency_sweep(c)) {
                SweepResult named = s;
                named.series = std::string(to_string(c.detuning_mode)) + "-" + s.series;
                out.sweep(named);
            }
        });
    } else if (scenario == "delta0-sweep") {
        if (cfg.delta0_values.empty()) throw ConfigError("delta0_sweep_mhz", 0, "delta0-sweep needs a sweep list");
        out.sweep(run_delta0_sweep(cfg));
    } else if (scenario == "rx-gate") {
        RxGateResult r = run_rx_gate(cfg);
        manifest.summary["rx_calibration"] = {{"delta0_over_chi", r.calibration.delta0_over_chi},
                                              {"delta0_over_2pi_mhz", units::to_mhz(r.calibration.delta0)},
                                              {"target_population_rwa", r.calibration.target_population},
                                              {"evaluations", r.calibration.evaluations}};
        out.file("calibration.csv", "delta0_over_chi,delta0_over_2pi_mhz,target_population\n" +
                                        format_number(r.calibration.delta0_over_chi) + "," +
                                        format_number(units::to_mhz(r.calibration.delta0)) + "," +
                                        format_number(r.calibration.target_population) + "\n");
        out.sweep({"rx-rwa", "delta0_over_chi", {r.rwa}});
        out.sweep({"rx-nrot", "delta0_over_chi", {r.nrot}});
        for (const auto& w : r.level_wigner) out.file("wigner_" + w.label + ".csv", wigner_csv(w.grid));
    } else if (scenario == "rz-gate") {
        RzGateResult r = run_rz_gate(cfg);
        manifest.summary["rz"] = {{"phase_rad", r.phase}, {"peak_ratio_beta0_over_max_drive", r.peak_ratio}};
        out.sweep({std::string("rz-driven-") + to_string(cfg.dynamics), "rz_envelope_scale", {r.driven}});
        out.sweep({std::string("rz-control-") + to_string(cfg.dynamics), "rz_envelope_scale", {r.control}});
    } else if (scenario == "decay-study") {
        per_mode([&](const ExperimentConfig& c) {
            for (auto s : run_decay_study(c)) {
                s.series = std::string(to_string(c.detuning_mode)) + "-" + to_string(c.dynamics) + "_" + s.series;
                out.sweep(s);
            }
        });
    } else {
        throw ConfigError("scenario", 0, "unknown scenario '" + scenario + "'");
    }
}

int execute(const Options& opt) {
    using namespace kpo;
    const auto start = std::chrono::steady_clock::now();

    ExperimentConfig cfg = opt.config_path.empty() ? ExperimentConfig{} : parse_config_file(opt.config_path);
    std::string dt_source = cfg.dt ? "config" : "scenario-default";
    if (opt.dt_fs > 0) {
        cfg.dt = units::fs_to_ns(opt.dt_fs);
        dt_source = "command-line";
    }
    if (opt.dim > 0) cfg.dim = opt.dim;
    if (opt.threads > 0) cfg.threads = opt.threads;
    std::string scenario = opt.scenario.empty() ? cfg.scenario : opt.scenario;
    if (scenario.empty()) throw ConfigError("scenario", 0, "no scenario given on the command line or in the config");
    cfg.scenario = scenario;

    RunManifest manifest;
    manifest.scenario = scenario;
    manifest.config = cfg;
    manifest.dt_source = dt_source;
    // the worker count does not change any result, so it is left out of the hash
    ExperimentConfig hashed = cfg;
    hashed.threads = 1;
    manifest.config_sha256 = sha256_hex(render_config(hashed));

    fs::create_directories(opt.out_dir);
    Writer out(opt.out_dir, manifest);
    try {
        run_scenario(scenario, cfg, out, manifest);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        manifest.failures.push_back(e.what());
    }

    manifest.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.outputs.push_back("manifest.json");
    write_file((fs::path(opt.out_dir) / "manifest.json").string(), manifest.to_json().dump(2) + "\n");

    for (const auto& f : manifest.failures) std::cerr << "kpo-sim: " << f << "\n";
    std::cout << scenario << ": " << (manifest.failed() ? "FAILED" : "ok") << ", " << manifest.outputs.size()
              << " files in " << opt.out_dir << "\n";
    return manifest.failed() ? 1 : 0;
}

void add_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config_path, "Experiment configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--dt-fs", opt.dt_fs, "Override the integration step (fs)")->check(CLI::PositiveNumber);
    cmd->add_option("--dim", opt.dim, "Override the Fock-space dimension")->check(CLI::Range(2, 1000));
    cmd->add_option("--threads", opt.threads, "Worker threads for sweep points")->check(CLI::Range(1, 256));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kerr parametric oscillator (parametron) simulator"};
    app.require_subcommand(1);
    Options opt;

    for (const auto& name : kpo::known_scenarios()) {
        auto* cmd = app.add_subcommand(name, "Run the " + name + " scenario");
        add_flags(cmd, opt);
        cmd->callback([&opt, name] { opt.scenario = name; });
    }
    auto* run = app.add_subcommand("run", "Run a scenario by name (defaults to the config's scenario)");
    run->add_option("scenario", opt.scenario, "Scenario name")
        ->check(CLI::IsMember(kpo::known_scenarios()));
    add_flags(run, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        return execute(opt);
    } catch (const kpo::ConfigError& e) {
        std::cerr << "kpo-sim: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "kpo-sim: " << e.what() << "\n";
        return 2;
    }
}
