#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fockspace.hpp"
#include "kpo/propagation.hpp"

namespace kpo {

/// Reorders the top pair so that the even-parity member comes first. Above the
/// quasi-degeneracy threshold the two cat levels swap energy order freely; the
/// even one is the state adiabatically connected to the vacuum.
inline void order_qubit_levels(EigenSystem& es) {
    if (es.size() >= 2 && es.parities[0] == Parity::odd && es.parities[1] == Parity::even) {
        std::swap(es.energies[0], es.energies[1]);
        std::swap(es.states[0], es.states[1]);
        std::swap(es.parities[0], es.parities[1]);
    }
}

/// Spectrum of H_RWA ordered for population bookkeeping (level 0 = even cat branch).
inline EigenSystem instantaneous_levels(const OperatorMatrix& h_rwa_now) {
    EigenSystem es = hermitian_eigh(h_rwa_now);
    order_qubit_levels(es);
    return es;
}

/// p_n = |<phi_n|psi>|^2 for the `count` highest levels.
inline std::vector<double> instantaneous_populations(const StateVector& psi, const OperatorMatrix& h_rwa_now,
                                                     int count) {
    EigenSystem es = instantaneous_levels(h_rwa_now);
    count = std::min(count, es.size());
    std::vector<double> p(count);
    for (int n = 0; n < count; ++n) p[n] = std::norm(es.states[n].dot(psi));
    return p;
}

inline std::vector<double> instantaneous_populations(const DensityMatrix& rho, const OperatorMatrix& h_rwa_now,
                                                     int count) {
    EigenSystem es = instantaneous_levels(h_rwa_now);
    count = std::min(count, es.size());
    std::vector<double> p(count);
    for (int n = 0; n < count; ++n) p[n] = es.states[n].dot(rho * es.states[n]).real();
    return p;
}

struct FidelityStats {
    double value_at_T = 0.0;
    double tail_mean = 0.0;
    double tail_std = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
};

/// Mean and population standard deviation of `series` over T < t <= T + window.
inline FidelityStats fidelity_stats(const std::vector<double>& times, const std::vector<double>& series, double T,
                                    double window) {
    if (times.size() != series.size()) throw InvalidArgument("times and series differ in length");
    const double eps = 1e-9;
    FidelityStats st;
    st.window_start = T;
    st.window_end = T + window;

    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < times.size(); ++i) {
        double d = std::abs(times[i] - T);
        if (d < best) {
            best = d;
            st.value_at_T = series[i];
        }
    }
    if (best > 1e-6) throw InvalidArgument("no sample at t = T");

    double sum = 0.0, sum2 = 0.0;
    long n = 0;
    for (size_t i = 0; i < times.size(); ++i) {
        if (times[i] > T + eps && times[i] <= T + window + eps) {
            sum += series[i];
            ++n;
        }
    }
    if (n == 0) throw InvalidArgument("fidelity window contains no samples");
    st.tail_mean = sum / double(n);
    for (size_t i = 0; i < times.size(); ++i)
        if (times[i] > T + eps && times[i] <= T + window + eps) sum2 += (series[i] - st.tail_mean) * (series[i] - st.tail_mean);
    st.tail_std = std::sqrt(sum2 / double(n));
    return st;
}

inline FidelityStats fidelity_stats(const Trajectory& traj, double T, double window, size_t column = 0) {
    return fidelity_stats(traj.times, traj.column(column), T, window);
}

/// Adiabatic coefficient |<phi_n|dH/dt|phi_m>| / (E_n - E_m)^2 between levels m and n
/// of the instantaneous Hamiltonian, equal to |<phi_n|d phi_m/dt>| / |E_n - E_m|.
inline double adiabatic_h(const EigenSystem& levels, const OperatorMatrix& h_dot_now, int m, int n) {
    if (m == n) throw InvalidArgument("adiabatic coefficient needs two distinct levels");
    if (m < 0 || n < 0 || m >= levels.size() || n >= levels.size()) throw InvalidArgument("level index out of range");
    if (m > n) std::swap(m, n);  // symmetric in (m, n); one evaluation order
    const double gap = levels.energies[n] - levels.energies[m];
    if (std::abs(gap) < 1e-9) throw DegenerateLevels("levels " + std::to_string(m) + " and " + std::to_string(n) +
                                                     " are degenerate; use parity sectors");
    return std::abs(levels.states[n].dot(h_dot_now * levels.states[m])) / (gap * gap);
}

inline double adiabatic_h(const OperatorMatrix& h_now, const OperatorMatrix& h_dot_now, int m, int n) {
    return adiabatic_h(instantaneous_levels(h_now), h_dot_now, m, n);
}

/// alpha = sqrt((2 beta + Delta) / chi)
inline double alpha_amplitude(double beta, double delta, double chi) {
    double radicand = (2.0 * beta + delta) / chi;
    if (radicand < 0) throw InvalidRegime("2 beta + Delta must be >= 0 for a cat amplitude");
    return std::sqrt(radicand);
}

/// Effective phase-flip rate gamma = 2 kappa alpha^2 from single-photon loss.
inline double dephasing_rate(double kappa, double alpha) {
    if (kappa < 0) throw InvalidArgument("kappa must be >= 0");
    return 2.0 * kappa * alpha * alpha;
}

/// Rectangular phase-space grid; node gamma = x + i p.
struct WignerSpec {
    double x_min = -4.0, x_max = 4.0;
    int nx = 81;
    double p_min = -4.0, p_max = 4.0;
    int np = 81;

    double x(int i) const { return nx == 1 ? x_min : x_min + (x_max - x_min) * i / (nx - 1); }
    double p(int j) const { return np == 1 ? p_min : p_min + (p_max - p_min) * j / (np - 1); }
};

/// W(gamma) = (2/pi) Tr[D(gamma)^dag rho D(gamma) Parity]; values indexed [j * nx + i] for (x_i, p_j).
struct WignerGrid {
    std::vector<double> xs;
    std::vector<double> ps;
    std::vector<double> values;
    bool truncation_warning = false;

    double at(int i, int j) const { return values[size_t(j) * xs.size() + size_t(i)]; }

    /// Riemann sum of W dx dp.
    double integral() const {
        double dx = xs.size() > 1 ? xs[1] - xs[0] : 1.0;
        double dp = ps.size() > 1 ? ps[1] - ps[0] : 1.0;
        double s = 0.0;
        for (double v : values) s += v;
        return s * dx * dp;
    }
};

namespace detail {

// Fock space large enough that displacing any state of `dim` levels by up to `radius`
// keeps the displaced amplitudes on levels < dim exact to double precision.
inline int wigner_extended_dim(int dim, double radius) {
    double r = std::sqrt(double(dim)) + radius + 3.0;
    return std::max(dim + 10, int(std::ceil(r * r)));
}

// Weighted pure-state decomposition of rho (only non-negligible weights).
inline std::vector<std::pair<double, StateVector>> pure_components(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(0.5 * (rho + rho.adjoint()));
    std::vector<std::pair<double, StateVector>> out;
    const double scale = solver.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < rho.rows(); ++j) {
        double w = solver.eigenvalues()(j);
        if (std::abs(w) > 1e-14 * scale) out.emplace_back(w, solver.eigenvectors().col(j));
    }
    return out;
}

inline bool near_cutoff(const DensityMatrix& rho) {
    const Eigen::Index dim = rho.rows();
    double tail = 0.0;
    for (Eigen::Index n = std::max<Eigen::Index>(0, dim - 5); n < dim; ++n) tail += rho(n, n).real();
    return tail > 1e-6;
}

}  // namespace detail

/// Wigner function on a grid.
///
/// D(-gamma) factorizes into exp(-i p X) exp(i x P) up to a phase, with
/// X = a + a^dag and P = i(a^dag - a). Both exponentials are taken from one
/// Hermitian eigendecomposition each in an enlarged Fock space, so every grid
/// node costs a single matrix-vector product per pure component.
inline WignerGrid wigner(const DensityMatrix& rho, const WignerSpec& spec = {}) {
    if (spec.nx < 1 || spec.np < 1 || !std::isfinite(spec.x_min) || !std::isfinite(spec.x_max) ||
        !std::isfinite(spec.p_min) || !std::isfinite(spec.p_max))
        throw InvalidArgument("Wigner grid must be finite and non-empty");
    const int dim = int(rho.rows());
    const double radius = std::hypot(std::max(std::abs(spec.x_min), std::abs(spec.x_max)),
                                     std::max(std::abs(spec.p_min), std::abs(spec.p_max)));
    const int big = detail::wigner_extended_dim(dim, radius);
    const OperatorMatrix a = annihilation(FockDim(big));
    const complex i(0.0, 1.0);

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> xq(a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> pq(i * (a.adjoint() - a));
    const OperatorMatrix& vx = xq.eigenvectors();
    const OperatorMatrix& vp = pq.eigenvectors();
    const OperatorMatrix vx_adj = vx.adjoint();

    WignerGrid grid;
    grid.truncation_warning = detail::near_cutoff(rho);
    for (int ix = 0; ix < spec.nx; ++ix) grid.xs.push_back(spec.x(ix));
    for (int jp = 0; jp < spec.np; ++jp) grid.ps.push_back(spec.p(jp));
    grid.values.assign(size_t(spec.nx) * size_t(spec.np), 0.0);

    const auto components = detail::pure_components(rho);
    const double two_over_pi = 2.0 / std::numbers::pi;
    Eigen::VectorXcd phase(big), s(big), v(big);
    for (const auto& [weight, psi] : components) {
        Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(big);
        padded.head(dim) = psi;
        const Eigen::VectorXcd in_p = vp.adjoint() * padded;
        for (int ix = 0; ix < spec.nx; ++ix) {
            const double x = grid.xs[ix];
            for (int k = 0; k < big; ++k) phase(k) = std::polar(1.0, x * pq.eigenvalues()(k));
            const Eigen::VectorXcd ux = vp * phase.cwiseProduct(in_p);
            s = vx_adj * ux;
            for (int jp = 0; jp < spec.np; ++jp) {
                const double p = grid.ps[jp];
                for (int k = 0; k < big; ++k) phase(k) = std::polar(1.0, -p * xq.eigenvalues()(k));
                v.noalias() = vx * phase.cwiseProduct(s);
                double acc = 0.0;
                for (int k = 0; k < big; ++k) acc += (k % 2 == 0 ? 1.0 : -1.0) * std::norm(v(k));
                grid.values[size_t(jp) * spec.nx + ix] += weight * two_over_pi * acc;
            }
        }
    }
    return grid;
}

inline WignerGrid wigner(const StateVector& psi, const WignerSpec& spec = {}) {
    return wigner(DensityMatrix(psi * psi.adjoint()), spec);
}

}  // namespace kpo
