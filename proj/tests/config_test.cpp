#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "kpo/config.hpp"
#include "kpo/manifest.hpp"
#include "kpo/output.hpp"
#include "kpo/units.hpp"

using namespace kpo;

namespace {

const char* kMinimal = R"(# baseline cat creation
[experiment]
scenario = cat-creation

[model]
omega_p_over_2pi_ghz = 16
chi_over_2pi_mhz = 68
beta0_over_2pi_mhz = 200
delta_over_2pi_mhz = -6.7   ; constant detuning

[control]
detuning_mode = constant
dynamics = nrot
t_ramp_ns = 10, 20, 30, 50, 100
)";

ConfigError expect_config_error(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return ConfigError("", 0, "");
}

void expect_relative(double a, double b) { EXPECT_NEAR(a, b, 1e-14 * std::max(1.0, std::abs(b))); }

}  // namespace

TEST(ParseConfig, MinimalCatCreation) {
    ExperimentConfig c = parse_config_text(kMinimal);
    EXPECT_EQ(c.scenario, "cat-creation");
    expect_relative(c.omega_p, 2 * std::numbers::pi * 16.0);
    expect_relative(c.chi, 2 * std::numbers::pi * 0.068);
    expect_relative(c.beta0, 2 * std::numbers::pi * 0.200);
    expect_relative(c.delta, -2 * std::numbers::pi * 0.0067);
    EXPECT_EQ(c.detuning_mode, DetuningMode::constant);
    EXPECT_EQ(c.dynamics, Dynamics::nrot);
    EXPECT_EQ(c.ramp_times, (std::vector<double>{10, 20, 30, 50, 100}));
    EXPECT_FALSE(c.dt.has_value());
}

TEST(ParseConfig, RoundTripsThroughManifest) {
    ExperimentConfig c = parse_config_text(kMinimal);
    RunManifest m;
    m.scenario = c.scenario;
    m.config = c;
    m.dt_source = "scenario-default";
    ExperimentConfig back = config_from_manifest(nlohmann::json::parse(m.to_json().dump()));
    EXPECT_EQ(back.scenario, c.scenario);
    expect_relative(back.omega_p, c.omega_p);
    expect_relative(back.chi, c.chi);
    expect_relative(back.beta0, c.beta0);
    expect_relative(back.delta, c.delta);
    expect_relative(back.delta0, c.delta0);
    EXPECT_EQ(back.detuning_mode, c.detuning_mode);
    EXPECT_EQ(back.dynamics, c.dynamics);
    EXPECT_EQ(back.ramp_times, c.ramp_times);
    EXPECT_EQ(back.dim, c.dim);
    EXPECT_EQ(back.dt.has_value(), c.dt.has_value());
    EXPECT_EQ(back.tail_window, c.tail_window);
    EXPECT_EQ(back.sample_interval, c.sample_interval);
    EXPECT_EQ(render_config(back), render_config(parse_config_text(render_config(back))));
}

TEST(ParseConfig, OmittedStepUsesScenarioDefaultAndIsRecorded) {
    ExperimentConfig c = parse_config_text(kMinimal);
    EXPECT_EQ(c.dt_for(Dynamics::nrot), default_dt_nrot);
    EXPECT_EQ(c.dt_for(Dynamics::rwa), default_dt_rwa);
    RunManifest m;
    m.config = c;
    m.dt_source = "scenario-default";
    nlohmann::json j = m.to_json();
    EXPECT_NEAR(j["resolved_parameters"]["dt_fs"].get<double>(), 10.0, 1e-12);
    EXPECT_EQ(j["dt_source"], "scenario-default");
}

TEST(ParseConfig, ExplicitStepInFemtoseconds) {
    ExperimentConfig c = parse_config_text(std::string(kMinimal) + "[numerics]\ndt_fs = 5\n");
    ASSERT_TRUE(c.dt.has_value());
    EXPECT_NEAR(*c.dt, 5e-6, 1e-20);
}

TEST(ParseConfig, NegativeKerrIsRejectedByName) {
    ConfigError e = expect_config_error("[model]\nchi_over_2pi_mhz = -5\n");
    EXPECT_EQ(e.key, "chi_over_2pi_mhz");
    EXPECT_EQ(e.line, 2);
    EXPECT_NE(std::string(e.what()).find("chi_over_2pi_mhz"), std::string::npos);
}

TEST(ParseConfig, PositiveInitialDetuningIsOutOfRegime) {
    ConfigError e = expect_config_error("[model]\n\ndelta0_over_2pi_mhz = 67\n");
    EXPECT_EQ(e.key, "delta0_over_2pi_mhz");
    EXPECT_EQ(e.line, 3);
    EXPECT_EQ(expect_config_error("[control]\ndelta0_sweep_mhz = -10, 5\n").key, "delta0_sweep_mhz");
}

TEST(ParseConfig, UnknownKeysAndSections) {
    EXPECT_EQ(expect_config_error("[model]\nbeta_mhz = 3\n").key, "beta_mhz");
    EXPECT_EQ(expect_config_error("[numerics]\nchi_over_2pi_mhz = 3\n").key, "chi_over_2pi_mhz");
    EXPECT_EQ(expect_config_error("[plotting]\n").line, 1);
    EXPECT_EQ(expect_config_error("dim = 3\n").key, "dim");
}

TEST(ParseConfig, MalformedValues) {
    EXPECT_EQ(expect_config_error("[numerics]\ndim = forty\n").key, "dim");
    EXPECT_EQ(expect_config_error("[numerics]\ndim = 40.5\n").key, "dim");
    EXPECT_EQ(expect_config_error("[numerics]\ndim = 1\n").key, "dim");
    EXPECT_EQ(expect_config_error("[numerics]\nconvergence = maybe\n").key, "convergence");
    EXPECT_EQ(expect_config_error("[control]\ndynamics = exact\n").key, "dynamics");
    EXPECT_EQ(expect_config_error("[control]\nt_ramp_ns = 10, -5\n").key, "t_ramp_ns");
    EXPECT_EQ(expect_config_error("[control]\nrx_bracket = 3\n").key, "rx_bracket");
    EXPECT_EQ(expect_config_error("[experiment]\nscenario = teleport\n").key, "scenario");
    EXPECT_EQ(expect_config_error("[model]\nchi_over_2pi_mhz =\n").key, "chi_over_2pi_mhz");
    EXPECT_EQ(expect_config_error("[model]\nchi_over_2pi_mhz = 1\nchi_over_2pi_mhz = 2\n").line, 3);
    EXPECT_EQ(expect_config_error("[model]\njust text\n").line, 2);
}

TEST(ParseConfig, DetuningModeList) {
    ExperimentConfig c = parse_config_text("[control]\ndetuning_mode = constant, linear-decay\n");
    ASSERT_EQ(c.modes().size(), 2u);
    EXPECT_EQ(c.modes()[1], DetuningMode::linear_decay);
    EXPECT_EQ(parse_config_text("[control]\ndetuning_mode = linear-decay\n").modes().size(), 1u);
}

TEST(ParseConfig, ShippedConfigsParse) {
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(KPO_CONFIG_DIR)) {
        if (entry.path().extension() != ".cfg") continue;
        EXPECT_NO_THROW(parse_config_file(entry.path().string())) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 5);
}

TEST(ParseConfig, MissingFile) { EXPECT_THROW(parse_config_file("/nonexistent/x.cfg"), ConfigError); }

TEST(Output, NumberFormatIsRoundTripExact) {
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(std::stod(format_number(2.0 / 3.0)), 2.0 / 3.0);
}

TEST(Output, StatsTableLayout) {
    PointResult p;
    p.sweep_value = 50;
    p.stats = {0.99, 0.995, 0.001, 50, 70};
    p.dt = 1e-5;
    p.dim = 40;
    p.convergence = ConvergenceStatus::converged;
    PointResult failed = p;
    failed.error = "diverged";
    EXPECT_EQ(stats_csv({p, failed}),
              "sweep_value,fidelity_at_T,tail_mean,tail_std,dt_fs,dim,converged\n"
              "50,0.98999999999999999,0.995,0.001,10,40,true\n"
              "50,,,,10,40,failed\n");
}

TEST(Output, TrajectoryTableLayout) {
    PointResult p;
    p.columns = {"p0", "p1", "target"};
    p.trajectory.times = {0.0, 0.5};
    p.trajectory.norms = {1.0, 1.0};
    p.trajectory.rows = {{1.0, 0.0, 0.25}, {0.5, 0.5, 0.75}};
    EXPECT_EQ(trajectory_csv(p), "t_ns,p0,p1,norm_or_trace,target\n0,1,0,1,0.25\n0.5,0.5,0.5,1,0.75\n");
}

TEST(Output, WignerRecords) {
    WignerGrid g;
    g.xs = {-1, 1};
    g.ps = {0};
    g.values = {0.25, -0.5};
    EXPECT_EQ(wigner_csv(g), "x,p,W\n-1,0,0.25\n1,0,-0.5\n");
}

TEST(Manifest, FailuresMarkTheRun) {
    RunManifest m;
    PointResult ok;
    ok.convergence = ConvergenceStatus::converged;
    m.add_point("s", ok);
    EXPECT_FALSE(m.failed());
    PointResult bad;
    bad.error = "norm drift";
    m.add_point("s", bad);
    PointResult unconverged;
    unconverged.convergence = ConvergenceStatus::not_converged;
    m.add_point("s", unconverged);
    EXPECT_EQ(m.failures.size(), 2u);
    EXPECT_EQ(m.to_json()["status"], "failed");
    EXPECT_EQ(m.to_json()["points"].size(), 3u);
}
