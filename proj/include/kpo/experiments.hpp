#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fockspace.hpp"
#include "kpo/model.hpp"
#include "kpo/observables.hpp"
#include "kpo/propagation.hpp"
#include "kpo/schedules.hpp"
#include "kpo/units.hpp"

namespace kpo {

enum class Dynamics { rwa, nrot };
enum class DetuningMode { constant, linear_decay };

inline const char* to_string(Dynamics d) { return d == Dynamics::rwa ? "rwa" : "nrot"; }
inline const char* to_string(DetuningMode m) { return m == DetuningMode::constant ? "constant" : "linear-decay"; }

/// Default integration steps (ns): H_RWA varies on ns scales, while the
/// non-resonant terms oscillate at up to 2 omega_p.
inline constexpr double default_dt_rwa = 1e-3;
inline constexpr double default_dt_nrot = 1e-5;

/// Resolved experiment description; frequencies in rad/ns, times in ns.
struct ExperimentConfig {
    std::string scenario;

    double omega_p = units::from_ghz(16.0);
    double chi = units::from_mhz(68.0);
    double beta0 = units::from_mhz(200.0);
    double delta = units::from_mhz(-6.7);
    double delta0 = units::from_mhz(-67.0);
    double kappa = 0.0;

    DetuningMode detuning_mode = DetuningMode::constant;
    /// Modes a front end should iterate over; empty means just `detuning_mode`.
    std::vector<DetuningMode> detuning_modes;
    Dynamics dynamics = Dynamics::nrot;

    std::vector<double> ramp_times{10.0, 20.0, 30.0, 50.0, 100.0};
    double gate_time = 100.0;
    std::vector<double> omega_p_values;
    std::vector<double> delta0_values;
    std::vector<double> kappa_values;

    std::optional<double> dt;
    int dim = 40;
    double tail_window = 20.0;
    double sample_interval = 0.1;
    int levels = 9;

    bool convergence = true;
    double convergence_tolerance = 1e-5;
    bool truncation_check = false;
    double truncation_tolerance = 1e-4;

    double rz_scale = 1.0;
    std::optional<double> rx_delta0_over_chi;
    double rx_bracket_lo = 0.5;
    double rx_bracket_hi = 8.0;
    double rx_tolerance = 1e-3;

    bool wigner_snapshots = false;
    WignerSpec wigner;

    int threads = 1;

    std::vector<DetuningMode> modes() const {
        return detuning_modes.empty() ? std::vector<DetuningMode>{detuning_mode} : detuning_modes;
    }

    double dt_for(Dynamics d) const { return dt.value_or(d == Dynamics::rwa ? default_dt_rwa : default_dt_nrot); }
};

enum class ConvergenceStatus { converged, not_converged, waived };

inline const char* to_string(ConvergenceStatus s) {
    switch (s) {
        case ConvergenceStatus::converged: return "true";
        case ConvergenceStatus::not_converged: return "false";
        default: return "waived";
    }
}

struct WignerSnapshot {
    std::string label;
    double time = 0.0;
    WignerGrid grid;
};

/// One sweep point with its provenance.
struct PointResult {
    double sweep_value = 0.0;
    FidelityStats stats;
    double dt = 0.0;
    int dim = 0;
    ConvergenceStatus convergence = ConvergenceStatus::waived;
    double convergence_diff = 0.0;
    std::optional<double> truncation_diff;
    Trajectory trajectory;  // rows: p0..p_{levels-1}, then scenario-specific extras
    std::vector<std::string> columns;
    std::vector<WignerSnapshot> wigner;
    std::string error;

    bool ok() const { return error.empty(); }
};

struct SweepResult {
    std::string series;
    std::string variable;
    std::vector<PointResult> points;
};

/// What a single propagation needs; all runners reduce to this.
struct PureRun {
    ModelParams params;
    Dynamics dynamics = Dynamics::nrot;
    Schedule drive = constant(0.0);
    std::function<StateVector(FockDim)> initial;
    double t_end = 0.0;
    double T = 0.0;  // fidelity reference time
    double tail_window = 20.0;
    double sample_interval = 0.1;
    int levels = 9;
    /// Fidelity column in the sampled rows (population index or extra column).
    int fidelity_column = 0;
    /// Extra sampled observables appended after the populations.
    std::function<std::vector<double>(double, const StateVector&)> extras;
    std::vector<std::string> extra_names;
    std::vector<double> snapshot_times;
};

namespace detail {

inline std::vector<std::string> population_columns(int levels) {
    std::vector<std::string> c;
    for (int n = 0; n < levels; ++n) c.push_back("p" + std::to_string(n));
    return c;
}

struct PureOutcome {
    Trajectory trajectory;
    std::vector<std::pair<double, StateVector>> snapshots;
};

inline PureOutcome simulate(const PureRun& run, double dt, int dim) {
    ModelParams p = run.params;
    p.dim = FockDim(dim);
    const FockDim fd(dim);
    const StateVector psi0 = run.initial(fd);

    PureOutcome out;
    StateSampler sampler = [&](double t, const StateVector& psi) {
        std::vector<double> row = instantaneous_populations(psi, h_rwa_at(t, p), run.levels);
        if (run.extras) {
            auto extra = run.extras(t, psi);
            row.insert(row.end(), extra.begin(), extra.end());
        }
        for (double ts : run.snapshot_times)
            if (std::abs(t - ts) < 1e-9) out.snapshots.emplace_back(t, psi);
        return row;
    };
    TimeGrid grid = TimeGrid::with_interval(0.0, run.t_end, dt, run.sample_interval);
    if (run.dynamics == Dynamics::rwa) {
        RwaGenerator gen(p, run.drive);
        out.trajectory = propagate_state(psi0, grid, gen, sampler);
    } else {
        NrotGenerator gen(p, build_term_set(p.chi, fd), run.drive);
        out.trajectory = propagate_state(psi0, grid, gen, sampler);
    }
    return out;
}

inline ConvergenceProbe make_probe(const Trajectory& traj, const PureRun& run) {
    ConvergenceProbe probe;
    probe.times = traj.times;
    probe.series = traj.column(size_t(run.fidelity_column));
    FidelityStats st = fidelity_stats(traj.times, probe.series, run.T, run.tail_window);
    probe.summary = {st.value_at_T, st.tail_mean, st.tail_std};
    return probe;
}

}  // namespace detail

/// Propagates one point, optionally verifying dt-halving convergence and
/// truncation stability; failures are recorded on the point, not thrown.
inline PointResult evaluate_point(const PureRun& run, double sweep_value, double dt, int dim, bool check_convergence,
                                  double conv_tol = 1e-5, bool check_truncation = false, double trunc_tol = 1e-4) {
    PointResult pr;
    pr.sweep_value = sweep_value;
    pr.dim = dim;
    pr.columns = detail::population_columns(run.levels);
    pr.columns.insert(pr.columns.end(), run.extra_names.begin(), run.extra_names.end());
    try {
        std::map<double, detail::PureOutcome> cache;
        auto run_at = [&](double h) {
            auto it = cache.find(h);
            if (it == cache.end()) it = cache.emplace(h, detail::simulate(run, h, dim)).first;
            return detail::make_probe(it->second.trajectory, run);
        };
        double used = dt;
        if (check_convergence) {
            ConvergenceReport rep = convergence_check(run_at, dt, conv_tol);
            used = rep.dt_accepted;
            pr.convergence = rep.passed ? ConvergenceStatus::converged : ConvergenceStatus::not_converged;
            pr.convergence_diff = std::max(rep.max_series_diff, rep.max_summary_diff);
        } else {
            run_at(dt);
        }
        detail::PureOutcome& outcome = cache.at(used);
        pr.dt = used;
        pr.trajectory = std::move(outcome.trajectory);
        pr.stats = fidelity_stats(pr.trajectory, run.T, run.tail_window, size_t(run.fidelity_column));
        for (auto& [t, psi] : outcome.snapshots) {
            pr.wigner.push_back({"t=" + std::to_string(t), t, {}});
            pr.wigner.back().grid = wigner(psi);
        }
        if (check_truncation) {
            auto bigger = detail::simulate(run, used, dim + 10);
            auto probe = detail::make_probe(bigger.trajectory, run);
            auto base = detail::make_probe(pr.trajectory, run);
            pr.truncation_diff = probe_difference(base, probe).second;
            if (*pr.truncation_diff >= trunc_tol)
                pr.error = "truncation check failed: dim+10 changes fidelity by " + std::to_string(*pr.truncation_diff);
        }
    } catch (const Error& e) {
        pr.error = e.what();
    }
    return pr;
}

/// Runs independent tasks on up to `threads` workers; results keep task order.
template <class Result>
std::vector<Result> run_tasks(const std::vector<std::function<Result()>>& tasks, int threads) {
    std::vector<Result> results(tasks.size());
    threads = std::max(1, std::min<int>(threads, int(tasks.size())));
    if (threads == 1) {
        for (size_t i = 0; i < tasks.size(); ++i) results[i] = tasks[i]();
        return results;
    }
    std::mutex m;
    size_t next = 0;
    auto worker = [&] {
        for (;;) {
            size_t i;
            {
                std::lock_guard lock(m);
                if (next >= tasks.size()) return;
                i = next++;
            }
            results[i] = tasks[i]();
        }
    };
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    pool.clear();
    return results;
}

inline Schedule detuning_schedule(DetuningMode mode, double delta, double delta0, double T) {
    return mode == DetuningMode::constant ? constant(delta) : linear_decay(delta0, T);
}

/// Cat-state creation from the vacuum with a linear pump ramp of duration T.
inline PureRun cat_creation_run(const ExperimentConfig& cfg, double T, DetuningMode mode, Dynamics dyn,
                                double omega_p, double delta0) {
    PureRun run{ModelParams{omega_p, cfg.chi, linear_ramp_hold(cfg.beta0, T),
                            detuning_schedule(mode, cfg.delta, delta0, T), FockDim(cfg.dim)}};
    run.dynamics = dyn;
    run.initial = [](FockDim d) { return fock_state(0, d); };
    run.T = T;
    run.t_end = T + cfg.tail_window;
    run.tail_window = cfg.tail_window;
    run.sample_interval = cfg.sample_interval;
    run.levels = cfg.levels;
    if (cfg.wigner_snapshots)
        for (double off : {0.0, 5.0, 10.0, 15.0})
            if (T + off <= run.t_end + 1e-9) run.snapshot_times.push_back(T + off);
    return run;
}

namespace detail {

inline SweepResult sweep(const std::string& series, const std::string& variable, const std::vector<double>& values,
                         const std::function<PureRun(double)>& make, const ExperimentConfig& cfg, Dynamics dyn) {
    std::vector<std::function<PointResult()>> tasks;
    for (double v : values)
        tasks.emplace_back([&, v] {
            return evaluate_point(make(v), v, cfg.dt_for(dyn), cfg.dim, cfg.convergence, cfg.convergence_tolerance,
                                  cfg.truncation_check, cfg.truncation_tolerance);
        });
    return {series, variable, run_tasks(tasks, cfg.threads)};
}

}  // namespace detail

/// Fidelity against the instantaneous even top level versus ramp time T.
inline SweepResult run_cat_creation(const ExperimentConfig& cfg) {
    return detail::sweep(
        std::string(to_string(cfg.detuning_mode)) + "-" + to_string(cfg.dynamics), "t_ramp_ns", cfg.ramp_times,
        [&](double T) { return cat_creation_run(cfg, T, cfg.detuning_mode, cfg.dynamics, cfg.omega_p, cfg.delta0); },
        cfg, cfg.dynamics);
}

/// Fidelity versus pump frequency at fixed Delta (wc follows wp). Sweep values are in GHz (f/2pi).
/// The second series is the omega_p-independent RWA reference.
inline std::vector<SweepResult> run_pump_frequency_sweep(const ExperimentConfig& cfg) {
    const double T = cfg.ramp_times.empty() ? 100.0 : cfg.ramp_times.front();
    std::vector<double> ghz;
    for (double w : cfg.omega_p_values) ghz.push_back(units::to_ghz(w));
    std::vector<SweepResult> out;
    out.push_back(detail::sweep(
        "nrot", "omega_p_over_2pi_ghz", ghz,
        [&](double f) { return cat_creation_run(cfg, T, cfg.detuning_mode, Dynamics::nrot, units::from_ghz(f), cfg.delta0); },
        cfg, Dynamics::nrot));
    out.push_back(detail::sweep(
        "rwa", "omega_p_over_2pi_ghz", ghz,
        [&](double f) { return cat_creation_run(cfg, T, cfg.detuning_mode, Dynamics::rwa, units::from_ghz(f), cfg.delta0); },
        cfg, Dynamics::rwa));
    return out;
}

/// Fidelity versus initial detuning of the linearly decaying schedule. Sweep values in MHz (f/2pi).
inline SweepResult run_delta0_sweep(const ExperimentConfig& cfg) {
    const double T = cfg.ramp_times.empty() ? 20.0 : cfg.ramp_times.front();
    std::vector<double> mhz;
    for (double d : cfg.delta0_values) mhz.push_back(units::to_mhz(d));
    return detail::sweep(
        std::string("linear-decay-") + to_string(cfg.dynamics), "delta0_over_2pi_mhz", mhz,
        [&](double d) {
            return cat_creation_run(cfg, T, DetuningMode::linear_decay, cfg.dynamics, cfg.omega_p, units::from_mhz(d));
        },
        cfg, cfg.dynamics);
}

/// Computational basis of the parametron qubit: the top two levels of H_RWA(beta, Delta = 0).
struct QubitBasis {
    StateVector even;  // |phi0>
    StateVector odd;   // |phi1>
    StateVector plus_alpha() const { return (even + odd) / std::sqrt(2.0); }
    StateVector minus_alpha() const { return (even - odd) / std::sqrt(2.0); }
};

inline QubitBasis qubit_basis(double beta, double chi, FockDim dim) {
    EigenSystem es = instantaneous_levels(build_h_rwa(0.0, chi, beta, dim));
    return {es.states[0], es.states[1]};
}

/// R_x setup: constant pump, sin^2 detuning pulse of depth delta0 (<= 0).
inline PureRun rx_run(const ExperimentConfig& cfg, double delta0, Dynamics dyn) {
    PureRun run{ModelParams{cfg.omega_p, cfg.chi, constant(cfg.beta0),
                            delta0 == 0.0 ? constant(0.0) : sin2_pulse(delta0, cfg.gate_time), FockDim(cfg.dim)}};
    run.dynamics = dyn;
    const double beta = cfg.beta0, chi = cfg.chi;
    run.initial = [beta, chi](FockDim d) { return qubit_basis(beta, chi, d).plus_alpha(); };
    run.T = cfg.gate_time;
    run.t_end = cfg.gate_time + cfg.tail_window;
    run.tail_window = cfg.tail_window;
    run.sample_interval = cfg.sample_interval;
    run.levels = cfg.levels;
    // target and initial-state populations; the basis is computed once per dimension
    auto cache = std::make_shared<std::map<int, QubitBasis>>();
    run.extras = [beta, chi, cache](double, const StateVector& psi) {
        const int d = int(psi.size());
        auto it = cache->find(d);
        if (it == cache->end()) it = cache->emplace(d, qubit_basis(beta, chi, FockDim(d))).first;
        return std::vector<double>{std::norm(it->second.minus_alpha().dot(psi)),
                                   std::norm(it->second.plus_alpha().dot(psi))};
    };
    run.extra_names = {"target", "initial"};
    run.fidelity_column = cfg.levels;
    return run;
}

/// Final target population of the R_x pulse, without convergence bookkeeping.
inline double rx_target_population(const ExperimentConfig& cfg, double delta0, Dynamics dyn) {
    PureRun run = rx_run(cfg, delta0, dyn);
    run.t_end = cfg.gate_time;
    run.sample_interval = cfg.gate_time;
    auto out = detail::simulate(run, cfg.dt_for(dyn), cfg.dim);
    return out.trajectory.rows.back().at(size_t(cfg.levels));
}

struct RxCalibration {
    double delta0 = 0.0;          // rad/ns, <= 0
    double delta0_over_chi = 0.0; // |Delta0| / chi
    double target_population = 0.0;
    int evaluations = 0;
};

/// Finds the detuning depth that maximizes the target population at T_g under
/// RWA dynamics. A coarse scan over |Delta0|/chi picks the bracket around the
/// first maximum with near-unit population, which golden-section search refines.
inline RxCalibration calibrate_rx_delta0(const ExperimentConfig& cfg) {
    RxCalibration cal;
    auto objective = [&](double r) {
        ++cal.evaluations;
        return rx_target_population(cfg, -r * cfg.chi, Dynamics::rwa);
    };
    const double lo = cfg.rx_bracket_lo, hi = cfg.rx_bracket_hi;
    const int n = std::max(4, int(std::ceil((hi - lo) / 0.25)));
    std::vector<double> rs, fs;
    for (int i = 0; i <= n; ++i) {
        rs.push_back(lo + (hi - lo) * i / n);
        fs.push_back(objective(rs.back()));
    }
    const double best = *std::max_element(fs.begin(), fs.end());
    int pick = -1;
    for (int i = 0; i <= n; ++i) {
        bool local = (i == 0 || fs[i] >= fs[i - 1]) && (i == n || fs[i] >= fs[i + 1]);
        if (local && fs[i] >= best - 0.05) {
            pick = i;
            break;
        }
    }
    if (pick <= 0 || pick >= n)
        throw CalibrationFailure("R_x calibration: optimum lies on the search bracket edge");

    double a = rs[pick - 1], b = rs[pick + 1];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > cfg.rx_tolerance) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    cal.delta0_over_chi = 0.5 * (a + b);
    cal.delta0 = -cal.delta0_over_chi * cfg.chi;
    cal.target_population = objective(cal.delta0_over_chi);
    return cal;
}

struct RxGateResult {
    RxCalibration calibration;
    PointResult rwa;
    PointResult nrot;
    std::vector<WignerSnapshot> level_wigner;
};

/// Calibrates under RWA, then evaluates the gate under RWA and NROT dynamics.
inline RxGateResult run_rx_gate(const ExperimentConfig& cfg) {
    RxGateResult res;
    if (cfg.rx_delta0_over_chi) {
        res.calibration.delta0_over_chi = *cfg.rx_delta0_over_chi;
        res.calibration.delta0 = -*cfg.rx_delta0_over_chi * cfg.chi;
        res.calibration.target_population = rx_target_population(cfg, res.calibration.delta0, Dynamics::rwa);
    } else {
        res.calibration = calibrate_rx_delta0(cfg);
    }
    const double d0 = res.calibration.delta0;
    std::vector<std::function<PointResult()>> tasks{
        [&] {
            return evaluate_point(rx_run(cfg, d0, Dynamics::rwa), res.calibration.delta0_over_chi,
                                  cfg.dt_for(Dynamics::rwa), cfg.dim, cfg.convergence, cfg.convergence_tolerance);
        },
        [&] {
            return evaluate_point(rx_run(cfg, d0, Dynamics::nrot), res.calibration.delta0_over_chi,
                                  cfg.dt_for(Dynamics::nrot), cfg.dim, cfg.convergence, cfg.convergence_tolerance);
        },
    };
    auto pts = run_tasks(tasks, cfg.threads);
    res.rwa = std::move(pts[0]);
    res.nrot = std::move(pts[1]);
    if (cfg.wigner_snapshots) {
        for (double delta : {0.0, d0}) {
            EigenSystem es = instantaneous_levels(build_h_rwa(delta, cfg.chi, cfg.beta0, FockDim(cfg.dim)));
            std::string tag = delta == 0.0 ? "delta0" : "delta_pulse";
            res.level_wigner.push_back({"level0_" + tag, 0.0, wigner(es.states[0], cfg.wigner)});
            res.level_wigner.push_back({"level1_" + tag, 0.0, wigner(es.states[1], cfg.wigner)});
        }
    }
    return res;
}

/// R_z(phi) setup: constant pump, Delta = 0, drive E(t)(a + a^dag) starting from |phi0>.
inline PureRun rz_run(const ExperimentConfig& cfg, double scale, Dynamics dyn) {
    PureRun run{ModelParams{cfg.omega_p, cfg.chi, constant(cfg.beta0), constant(0.0), FockDim(cfg.dim)}};
    run.dynamics = dyn;
    run.drive = scale == 0.0 ? constant(0.0) : rz_envelope(cfg.beta0, cfg.chi, cfg.gate_time, scale);
    const double beta = cfg.beta0, chi = cfg.chi;
    run.initial = [beta, chi](FockDim d) { return qubit_basis(beta, chi, d).even; };
    run.T = cfg.gate_time;
    run.t_end = cfg.gate_time + cfg.tail_window;
    run.tail_window = cfg.tail_window;
    run.sample_interval = cfg.sample_interval;
    run.levels = cfg.levels;
    return run;
}

struct RzGateResult {
    double phase = 0.0;
    double peak_ratio = 0.0;  // beta0 / max E
    PointResult driven;       // fidelity = population of |phi1> (odd phase) or |phi0> (even multiple of pi)
    PointResult control;      // E = 0, fidelity = survival of |phi0>
};

/// Drives the R_z pulse under the configured dynamics and the undriven control.
inline RzGateResult run_rz_gate(const ExperimentConfig& cfg) {
    RzGateResult res;
    Schedule env = rz_envelope(cfg.beta0, cfg.chi, cfg.gate_time, cfg.rz_scale);
    res.phase = rz_phase(env, cfg.beta0, cfg.chi);
    res.peak_ratio = cfg.beta0 / peak_value(env);
    // an odd multiple of pi lands on |phi1>; otherwise the fidelity is |phi0> survival
    const double turns = res.phase / std::numbers::pi;
    const bool flips = std::abs(std::fmod(std::round(turns), 2.0)) == 1.0;

    PureRun driven = rz_run(cfg, cfg.rz_scale, cfg.dynamics);
    driven.fidelity_column = flips ? 1 : 0;
    PureRun control = rz_run(cfg, 0.0, cfg.dynamics);
    control.fidelity_column = 0;
    const double dt = cfg.dt_for(cfg.dynamics);
    std::vector<std::function<PointResult()>> tasks{
        [&] { return evaluate_point(driven, cfg.rz_scale, dt, cfg.dim, cfg.convergence, cfg.convergence_tolerance,
                                    cfg.truncation_check, cfg.truncation_tolerance); },
        [&] { return evaluate_point(control, 0.0, dt, cfg.dim, cfg.convergence, cfg.convergence_tolerance,
                                    cfg.truncation_check, cfg.truncation_tolerance); },
    };
    auto pts = run_tasks(tasks, cfg.threads);
    res.driven = std::move(pts[0]);
    res.control = std::move(pts[1]);
    return res;
}

/// Density-matrix cat creation with single-photon loss.
struct DensityRun {
    ModelParams params;
    Dynamics dynamics = Dynamics::rwa;
    double kappa = 0.0;
    double T = 0.0;
    double t_end = 0.0;
    double tail_window = 20.0;
    double sample_interval = 0.1;
    int levels = 9;
};

namespace detail {

inline Trajectory simulate_density(const DensityRun& run, double dt, int dim) {
    ModelParams p = run.params;
    p.dim = FockDim(dim);
    DensityMatrix rho0 = DensityMatrix::Zero(dim, dim);
    rho0(0, 0) = 1.0;
    DensitySampler sampler = [&](double t, const DensityMatrix& rho) {
        return instantaneous_populations(rho, h_rwa_at(t, p), run.levels);
    };
    TimeGrid grid = TimeGrid::with_interval(0.0, run.t_end, dt, run.sample_interval);
    if (run.dynamics == Dynamics::rwa) {
        RwaGenerator gen(p);
        return propagate_density(rho0, grid, gen, run.kappa, sampler);
    }
    NrotGenerator gen(p, build_term_set(p.chi, FockDim(dim)));
    return propagate_density(rho0, grid, gen, run.kappa, sampler);
}

}  // namespace detail

inline PointResult evaluate_density_point(const DensityRun& run, double sweep_value, double dt, int dim,
                                          bool check_convergence, double conv_tol = 1e-5) {
    PointResult pr;
    pr.sweep_value = sweep_value;
    pr.dim = dim;
    pr.columns = detail::population_columns(run.levels);
    try {
        std::map<double, Trajectory> cache;
        auto run_at = [&](double h) {
            auto it = cache.find(h);
            if (it == cache.end()) it = cache.emplace(h, detail::simulate_density(run, h, dim)).first;
            ConvergenceProbe probe;
            probe.times = it->second.times;
            probe.series = it->second.column(0);
            FidelityStats st = fidelity_stats(probe.times, probe.series, run.T, run.tail_window);
            probe.summary = {st.value_at_T, st.tail_mean, st.tail_std};
            return probe;
        };
        double used = dt;
        if (check_convergence) {
            ConvergenceReport rep = convergence_check(run_at, dt, conv_tol);
            used = rep.dt_accepted;
            pr.convergence = rep.passed ? ConvergenceStatus::converged : ConvergenceStatus::not_converged;
            pr.convergence_diff = std::max(rep.max_series_diff, rep.max_summary_diff);
        } else {
            run_at(dt);
        }
        pr.dt = used;
        pr.trajectory = std::move(cache.at(used));
        pr.stats = fidelity_stats(pr.trajectory, run.T, run.tail_window, 0);
    } catch (const Error& e) {
        pr.error = e.what();
    }
    return pr;
}

inline DensityRun decay_run(const ExperimentConfig& cfg, double T, double kappa, DetuningMode mode, Dynamics dyn) {
    DensityRun run{ModelParams{cfg.omega_p, cfg.chi, linear_ramp_hold(cfg.beta0, T),
                               detuning_schedule(mode, cfg.delta, cfg.delta0, T), FockDim(cfg.dim)}};
    run.dynamics = dyn;
    run.kappa = kappa;
    run.T = T;
    run.t_end = T + cfg.tail_window;
    run.tail_window = cfg.tail_window;
    run.sample_interval = cfg.sample_interval;
    run.levels = cfg.levels;
    return run;
}

/// Fidelity versus T for every loss rate; one series per kappa (kHz, f/2pi).
inline std::vector<SweepResult> run_decay_study(const ExperimentConfig& cfg) {
    std::vector<double> kappas = cfg.kappa_values.empty() ? std::vector<double>{cfg.kappa} : cfg.kappa_values;
    std::vector<std::function<PointResult()>> tasks;
    for (double k : kappas)
        for (double T : cfg.ramp_times)
            tasks.emplace_back([&cfg, k, T] {
                return evaluate_density_point(decay_run(cfg, T, k, cfg.detuning_mode, cfg.dynamics), T,
                                              cfg.dt_for(cfg.dynamics), cfg.dim, cfg.convergence,
                                              cfg.convergence_tolerance);
            });
    auto pts = run_tasks(tasks, cfg.threads);
    std::vector<SweepResult> out;
    size_t i = 0;
    for (double k : kappas) {
        char label[64];
        std::snprintf(label, sizeof label, "kappa_%gkhz", units::to_khz(k));
        SweepResult s{label, "t_ramp_ns", {}};
        for (size_t j = 0; j < cfg.ramp_times.size(); ++j) s.points.push_back(std::move(pts[i++]));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace kpo
