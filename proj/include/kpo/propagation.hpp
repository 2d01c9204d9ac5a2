#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fockspace.hpp"
#include "kpo/model.hpp"

namespace kpo {

/// Uniform grid t_start + i dt; observables recorded every `sample_stride` steps.
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    double dt = 0.0;
    long sample_stride = 1;

    long steps() const {
        if (!(dt > 0)) throw InvalidArgument("time step must be > 0");
        if (sample_stride < 1) throw InvalidArgument("sample stride must be >= 1");
        double n = (t_end - t_start) / dt;
        long rounded = std::lround(n);
        if (rounded < 0 || std::abs(n - double(rounded)) > 1e-6 * std::max(1.0, n))
            throw InvalidArgument("time window is not an integer number of steps");
        return rounded;
    }
    double time(long i) const { return t_start + double(i) * dt; }

    /// Grid with samples every `sample_interval` ns (which must be a multiple of dt).
    static TimeGrid with_interval(double t_start, double t_end, double dt, double sample_interval) {
        double ratio = sample_interval / dt;
        long stride = std::lround(ratio);
        if (stride < 1 || std::abs(ratio - double(stride)) > 1e-6 * ratio)
            throw InvalidArgument("sample interval must be a multiple of dt");
        TimeGrid g{t_start, t_end, dt, stride};
        g.steps();
        return g;
    }
};

/// Time-sampled observables of one run.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> norms;  // |psi|^2, or Tr rho for density runs
    std::vector<std::vector<double>> rows;
    std::vector<StateVector> state_snapshots;
    std::vector<DensityMatrix> density_snapshots;

    size_t size() const { return times.size(); }

    std::vector<double> column(size_t j) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.at(j));
        return out;
    }
};

using StateSampler = std::function<std::vector<double>(double, const StateVector&)>;
using DensitySampler = std::function<std::vector<double>(double, const DensityMatrix&)>;

struct PropagationOptions {
    double norm_tolerance = 1e-6;
    bool keep_snapshots = false;
};

/// y = H(t) x, for a generator type that assembles H internally.
template <class G>
concept Generator = requires(G& g, double t, const StateVector& x, StateVector& y) { g.apply(t, x, y); };

/// Wraps a dense time -> matrix callback as a generator.
class DenseGenerator {
public:
    explicit DenseGenerator(std::function<OperatorMatrix(double)> h) : h_(std::move(h)) {}
    void apply(double t, const StateVector& x, StateVector& y) { y.noalias() = h_(t) * x; }

private:
    std::function<OperatorMatrix(double)> h_;
};

/// Classic fourth-order Runge-Kutta for d psi/dt = -i H(t) psi with reusable buffers.
template <Generator G>
class SchrodingerStepper {
public:
    SchrodingerStepper(G& gen, int dim) : gen_(gen), k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    void step(StateVector& psi, double t, double dt) {
        const complex mi(0.0, -1.0);
        const double h = 0.5 * dt;
        gen_.apply(t, psi, k1_);
        k1_ *= mi;
        tmp_ = psi + h * k1_;
        gen_.apply(t + h, tmp_, k2_);
        k2_ *= mi;
        tmp_ = psi + h * k2_;
        gen_.apply(t + h, tmp_, k3_);
        k3_ *= mi;
        tmp_ = psi + dt * k3_;
        gen_.apply(t + dt, tmp_, k4_);
        k4_ *= mi;
        psi += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    G& gen_;
    StateVector k1_, k2_, k3_, k4_, tmp_;
};

inline bool all_finite(const Eigen::MatrixXcd& m) { return m.allFinite(); }

/// One RK4 step with a dense Hamiltonian callback.
inline StateVector rk4_step(const StateVector& state, double t, double dt,
                            const std::function<OperatorMatrix(double)>& h_fn) {
    DenseGenerator gen(h_fn);
    SchrodingerStepper<DenseGenerator> stepper(gen, int(state.size()));
    StateVector psi = state;
    stepper.step(psi, t, dt);
    if (!psi.allFinite()) throw DivergenceError(t);
    return psi;
}

/// Integrates the Schrodinger equation over the grid, sampling every stride.
/// The state is never renormalized; norm drift beyond tolerance is an error.
template <Generator G>
Trajectory propagate_state(const StateVector& psi0, const TimeGrid& grid, G& gen, const StateSampler& sampler,
                           const PropagationOptions& opt = {}) {
    if (std::abs(psi0.squaredNorm() - 1.0) > 1e-10) throw InvalidArgument("initial state must be normalized");
    const long steps = grid.steps();
    Trajectory traj;
    StateVector psi = psi0;
    SchrodingerStepper<G> stepper(gen, int(psi.size()));

    auto record = [&](long i) {
        const double t = grid.time(i);
        if (!psi.allFinite()) throw DivergenceError(t);
        const double norm = psi.squaredNorm();
        if (std::abs(norm - 1.0) > opt.norm_tolerance) throw StepSizeError(t, std::abs(norm - 1.0));
        traj.times.push_back(t);
        traj.norms.push_back(norm);
        traj.rows.push_back(sampler ? sampler(t, psi) : std::vector<double>{});
        if (opt.keep_snapshots) traj.state_snapshots.push_back(psi);
    };

    record(0);
    for (long i = 0; i < steps; ++i) {
        stepper.step(psi, grid.time(i), grid.dt);
        if ((i + 1) % grid.sample_stride == 0 || i + 1 == steps) record(i + 1);
    }
    return traj;
}

/// -i[H, rho] + (kappa/2)([a rho, a^dag] + [a, rho a^dag])
inline DensityMatrix lindblad_rhs(const DensityMatrix& rho, const OperatorMatrix& h, double kappa) {
    const int dim = int(rho.rows());
    const OperatorMatrix a = annihilation(FockDim(dim));
    const OperatorMatrix ad = a.adjoint();
    const complex i(0.0, 1.0);
    DensityMatrix out = -i * (h * rho - rho * h);
    if (kappa != 0.0) {
        out += 0.5 * kappa * ((a * rho) * ad - ad * (a * rho) + a * (rho * ad) - (rho * ad) * a);
    }
    return out;
}

/// RK4 for the master equation with single-photon loss at rate kappa.
/// The commutator is evaluated as -i(X - X^dag) with X = H rho, which keeps
/// every stage exactly Hermitian.
template <Generator G>
class LindbladStepper {
public:
    LindbladStepper(G& gen, int dim, double kappa)
        : gen_(gen), dim_(dim), kappa_(kappa), col_in_(dim), col_out_(dim), x_(dim, dim), k1_(dim, dim),
          k2_(dim, dim), k3_(dim, dim), k4_(dim, dim), tmp_(dim, dim) {}

    void rhs(double t, const DensityMatrix& rho, DensityMatrix& out) {
        for (int c = 0; c < dim_; ++c) {
            col_in_ = rho.col(c);
            gen_.apply(t, col_in_, col_out_);
            x_.col(c) = col_out_;
        }
        const complex mi(0.0, -1.0);
        out = mi * (x_ - x_.adjoint());
        if (kappa_ != 0.0) {
            for (int c = 0; c < dim_; ++c)
                for (int r = 0; r < dim_; ++r) {
                    complex v = -0.5 * kappa_ * double(r + c) * rho(r, c);
                    if (r + 1 < dim_ && c + 1 < dim_)
                        v += kappa_ * std::sqrt(double(r + 1) * double(c + 1)) * rho(r + 1, c + 1);
                    out(r, c) += v;
                }
        }
    }

    void step(DensityMatrix& rho, double t, double dt) {
        const double h = 0.5 * dt;
        rhs(t, rho, k1_);
        tmp_ = rho + h * k1_;
        rhs(t + h, tmp_, k2_);
        tmp_ = rho + h * k2_;
        rhs(t + h, tmp_, k3_);
        tmp_ = rho + dt * k3_;
        rhs(t + dt, tmp_, k4_);
        rho += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    G& gen_;
    int dim_;
    double kappa_;
    StateVector col_in_, col_out_;
    DensityMatrix x_, k1_, k2_, k3_, k4_, tmp_;
};

struct DensityPropagationOptions {
    double trace_tolerance = 1e-8;
    bool keep_snapshots = false;
};

template <Generator G>
Trajectory propagate_density(const DensityMatrix& rho0, const TimeGrid& grid, G& gen, double kappa,
                             const DensitySampler& sampler, const DensityPropagationOptions& opt = {}) {
    if (kappa < 0) throw InvalidArgument("kappa must be >= 0");
    if (std::abs(rho0.trace().real() - 1.0) > 1e-10) throw InvalidArgument("initial density matrix must have unit trace");
    const long steps = grid.steps();
    Trajectory traj;
    DensityMatrix rho = rho0;
    LindbladStepper<G> stepper(gen, int(rho.rows()), kappa);

    auto record = [&](long i) {
        const double t = grid.time(i);
        if (!rho.allFinite()) throw DivergenceError(t);
        const double tr = rho.trace().real();
        if (std::abs(tr - 1.0) > opt.trace_tolerance) throw StepSizeError(t, std::abs(tr - 1.0));
        traj.times.push_back(t);
        traj.norms.push_back(tr);
        traj.rows.push_back(sampler ? sampler(t, rho) : std::vector<double>{});
        if (opt.keep_snapshots) traj.density_snapshots.push_back(rho);
    };

    record(0);
    for (long i = 0; i < steps; ++i) {
        stepper.step(rho, grid.time(i), grid.dt);
        if ((i + 1) % grid.sample_stride == 0 || i + 1 == steps) record(i + 1);
    }
    return traj;
}

/// What a convergence rerun compares: a sampled series and a few summary numbers.
struct ConvergenceProbe {
    std::vector<double> times;
    std::vector<double> series;
    std::vector<double> summary;
};

struct ConvergenceReport {
    bool passed = false;
    double dt_accepted = 0.0;  // coarser dt of the first passing pair
    int halvings = 0;
    double max_series_diff = 0.0;
    double max_summary_diff = 0.0;
    ConvergenceProbe accepted;  // probe computed at dt_accepted
};

inline std::pair<double, double> probe_difference(const ConvergenceProbe& a, const ConvergenceProbe& b) {
    if (a.times.size() != b.times.size() || a.series.size() != b.series.size() ||
        a.summary.size() != b.summary.size())
        throw InvalidArgument("convergence probes have mismatched sampling");
    double ds = 0.0, dm = 0.0;
    for (size_t i = 0; i < a.series.size(); ++i) ds = std::max(ds, std::abs(a.series[i] - b.series[i]));
    for (size_t i = 0; i < a.summary.size(); ++i) dm = std::max(dm, std::abs(a.summary[i] - b.summary[i]));
    return {ds, dm};
}

/// Reruns at dt/2 and compares. A failed comparison is retried one level
/// finer (dt/2 vs dt/4) before the report is flagged as not converged.
/// `first`, when given, is the already computed probe at `dt`.
template <class Run>
ConvergenceReport convergence_check(Run&& run, double dt, double tolerance = 1e-5,
                                    std::optional<ConvergenceProbe> first = std::nullopt) {
    ConvergenceReport report;
    ConvergenceProbe coarse = first ? std::move(*first) : run(dt);
    double h = dt;
    for (int level = 1; level <= 2; ++level) {
        ConvergenceProbe fine = run(h / 2);
        auto [ds, dm] = probe_difference(coarse, fine);
        report.halvings = level;
        report.max_series_diff = ds;
        report.max_summary_diff = dm;
        if (ds < tolerance && dm < tolerance) {
            report.passed = true;
            report.dt_accepted = h;
            report.accepted = std::move(coarse);
            return report;
        }
        coarse = std::move(fine);
        h /= 2;
    }
    report.dt_accepted = h;
    report.accepted = std::move(coarse);
    return report;
}

}  // namespace kpo
