#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fockspace.hpp"
#include "kpo/schedules.hpp"

// Rotating-frame parametron Hamiltonian.
//
// Starting from the fourth-order expansion of the SQUID-array potential,
//   H = wc (a^dag a) - (chi/12)(a + a^dag)^4 + 2 beta (a + a^dag)^2 cos(wp t),
// with wc = sqrt(8 E_C E_J / N), chi = E_C / N^2, beta = wc dE_J / (8 E_J),
// and moving to the frame rotating at wp/2 gives
//   H(t) = (wc - wp/2) n - (chi/12) M(t)^4 + 2 beta cos(wp t) M(t)^2,
//   M(t) = a e^{-i wp t/2} + a^dag e^{i wp t/2}.
// Expanding M^4 and M^2 into operator words and grouping by the net number of
// creation operators k gives H(t) = sum_k e^{i k wp t/2} (...) with fixed
// matrices. Keeping only the k = 0 content yields
//   H_RWA = Delta n - (chi/2) a^dag a^dag a a + beta (a^2 + a^dag^2),
// with Delta = wc - chi - wp/2; the -chi comes from normal ordering M^4.
// The (chi beta / wc)(a + a^dag)^4 cos(wp t) correction and all c-number
// terms are left out.

namespace kpo {

/// Physical parameters of a run; frequencies in rad/ns.
struct ModelParams {
    double omega_p;
    double chi;
    Schedule beta;
    Schedule delta;
    FockDim dim;

    /// Bare resonator frequency wc(t) = wp/2 + Delta(t) + chi implied by the detuning.
    double omega_c(double t) const { return 0.5 * omega_p + eval_schedule(delta, t) + chi; }

    void validate() const {
        if (!(omega_p > 0)) throw InvalidArgument("omega_p must be > 0");
        if (!(chi > 0)) throw InvalidArgument("chi must be > 0");
    }
};

/// Phase-grouped decomposition of the rotating-frame Hamiltonian.
struct TermSet {
    static constexpr int kerr_min = -4;
    static constexpr int pump_min = -2;

    OperatorMatrix number;               // n
    std::array<OperatorMatrix, 5> kerr;  // M4_k for k = -4, -2, 0, 2, 4 (includes -chi/12)
    std::array<OperatorMatrix, 3> pump;  // M2_k for k = -2, 0, 2
    double chi;
    int dim;

    const OperatorMatrix& kerr_group(int k) const { return kerr.at((k - kerr_min) / 2); }
    const OperatorMatrix& pump_group(int k) const { return pump.at((k - pump_min) / 2); }
};

inline OperatorMatrix build_h_rwa(double delta, double chi, double beta, FockDim dim) {
    OperatorMatrix h = OperatorMatrix::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) h(n, n) = delta * n - 0.5 * chi * n * (n - 1);
    for (int n = 0; n + 2 < dim; ++n) {
        double amp = beta * std::sqrt(double(n + 1) * double(n + 2));
        h(n + 2, n) = amp;
        h(n, n + 2) = amp;
    }
    return h;
}

/// dH_RWA/dt from the schedule rates.
inline OperatorMatrix build_h_rwa_rate(double delta_rate, double beta_rate, FockDim dim) {
    return build_h_rwa(delta_rate, 0.0, beta_rate, dim);
}

inline OperatorMatrix build_drive(FockDim dim) {
    OperatorMatrix a = annihilation(dim);
    return a + a.adjoint();
}

/// Enumerates all words of the given length over {a, a^dag}, multiplied in the
/// truncated space, and accumulates each into the group of its net phase index.
inline TermSet build_term_set(double chi, FockDim dim) {
    const OperatorMatrix a = annihilation(dim);
    const OperatorMatrix ad = a.adjoint();
    TermSet ts;
    ts.chi = chi;
    ts.dim = dim;
    ts.number = number_operator(dim);
    for (auto& m : ts.kerr) m = OperatorMatrix::Zero(dim, dim);
    for (auto& m : ts.pump) m = OperatorMatrix::Zero(dim, dim);

    auto accumulate = [&](int length, auto&& sink) {
        for (int bits = 0; bits < (1 << length); ++bits) {
            OperatorMatrix word = identity(dim);
            int k = 0;
            for (int i = 0; i < length; ++i) {
                bool raise = (bits >> i) & 1;
                word = word * (raise ? ad : a);
                k += raise ? 1 : -1;
            }
            sink(k, word);
        }
    };
    accumulate(4, [&](int k, const OperatorMatrix& w) { ts.kerr[(k - TermSet::kerr_min) / 2] += w; });
    accumulate(2, [&](int k, const OperatorMatrix& w) { ts.pump[(k - TermSet::pump_min) / 2] += w; });
    for (auto& m : ts.kerr) m *= -chi / 12.0;
    return ts;
}

/// Full rotating-frame Hamiltonian including the non-resonant terms.
inline OperatorMatrix h_rot_at(double t, const ModelParams& p, const TermSet& terms) {
    if (terms.dim != p.dim) throw InvalidArgument("term set dimension does not match model parameters");
    const double theta = 0.5 * p.omega_p * t;
    const double beta = eval_schedule(p.beta, t);
    const double pump = 2.0 * beta * std::cos(p.omega_p * t);

    OperatorMatrix h = (p.omega_c(t) - 0.5 * p.omega_p) * terms.number;
    for (int k = -4; k <= 4; k += 2) h += std::polar(1.0, k * theta) * terms.kerr_group(k);
    for (int k = -2; k <= 2; k += 2) h += (pump * std::polar(1.0, k * theta)) * terms.pump_group(k);
    return h;
}

/// Hermitian matrix stored as its diagonal and lower bands up to `max_offset`:
/// lower[k][c] = H(c + k, c). Upper entries follow from Hermiticity.
class HermitianBands {
public:
    HermitianBands(int dim, int max_offset)
        : dim_(dim), max_offset_(max_offset), lower_(max_offset + 1), active_(max_offset + 1, true) {
        for (int k = 0; k <= max_offset; ++k) lower_[k].assign(std::max(dim - k, 0), complex{});
    }

    /// Bands marked inactive are skipped by apply() and must hold zeros.
    void set_active(int k, bool on) { active_[k] = on; }

    int dim() const { return dim_; }
    int max_offset() const { return max_offset_; }
    std::vector<complex>& band(int k) { return lower_[k]; }
    const std::vector<complex>& band(int k) const { return lower_[k]; }

    /// y = H x
    void apply(const complex* x, complex* y) const {
        // Plain real arithmetic: std::complex products go through the
        // Annex G NaN-recovery path, which dominates the step cost here.
        const double* xr = reinterpret_cast<const double*>(x);
        double* yr = reinterpret_cast<double*>(y);
        const double* d = reinterpret_cast<const double*>(lower_[0].data());
        for (int n = 0; n < dim_; ++n) {
            const double br = d[2 * n], bi = d[2 * n + 1], vr = xr[2 * n], vi = xr[2 * n + 1];
            yr[2 * n] = br * vr - bi * vi;
            yr[2 * n + 1] = br * vi + bi * vr;
        }
        for (int k = 1; k <= max_offset_; ++k) {
            if (!active_[k]) continue;
            const double* b = reinterpret_cast<const double*>(lower_[k].data());
            const int len = dim_ - k;
            for (int c = 0; c < len; ++c) {
                const double br = b[2 * c], bi = b[2 * c + 1];
                const double lr = xr[2 * c], li = xr[2 * c + 1];
                const double ur = xr[2 * (c + k)], ui = xr[2 * (c + k) + 1];
                yr[2 * (c + k)] += br * lr - bi * li;
                yr[2 * (c + k) + 1] += br * li + bi * lr;
                yr[2 * c] += br * ur + bi * ui;
                yr[2 * c + 1] += br * ui - bi * ur;
            }
        }
    }

    OperatorMatrix dense() const {
        OperatorMatrix m = OperatorMatrix::Zero(dim_, dim_);
        for (int k = 0; k <= max_offset_; ++k)
            for (int c = 0; c + k < dim_; ++c) {
                m(c + k, c) = lower_[k][c];
                m(c, c + k) = std::conj(lower_[k][c]);
            }
        return m;
    }

private:
    int dim_;
    int max_offset_;
    std::vector<std::vector<complex>> lower_;
    std::vector<bool> active_;
};

namespace detail {

// Real lower band k of a real-valued matrix: out[c] = m(c + k, c).
inline std::vector<double> lower_band(const OperatorMatrix& m, int k) {
    std::vector<double> out(std::max<Eigen::Index>(m.rows() - k, 0));
    for (size_t c = 0; c < out.size(); ++c) out[c] = m(Eigen::Index(c) + k, Eigen::Index(c)).real();
    return out;
}

inline std::vector<double> drive_band(int dim) {
    std::vector<double> out(dim - 1);
    for (int c = 0; c + 1 < dim; ++c) out[c] = std::sqrt(double(c + 1));
    return out;
}

}  // namespace detail

/// Time-dependent rotating-frame Hamiltonian with optional drive E(t)(a + a^dag),
/// applied in banded form. Each phase group M_k only connects |n> to |n + k>, so
/// the matrix-vector product costs O(dim) per band.
class NrotGenerator {
public:
    NrotGenerator(ModelParams params, const TermSet& terms, Schedule drive = constant(0.0))
        : p_(std::move(params)), drive_(std::move(drive)), bands_(terms.dim, 4) {
        if (terms.dim != p_.dim) throw InvalidArgument("term set dimension does not match model parameters");
        p_.validate();
        kerr0_ = detail::lower_band(terms.kerr_group(0), 0);
        kerr2_ = detail::lower_band(terms.kerr_group(2), 2);
        kerr4_ = detail::lower_band(terms.kerr_group(4), 4);
        pump0_ = detail::lower_band(terms.pump_group(0), 0);
        pump2_ = detail::lower_band(terms.pump_group(2), 2);
        drive1_ = detail::drive_band(terms.dim);
        has_drive_ = !is_zero(drive_);
        bands_.set_active(1, has_drive_);
        bands_.set_active(3, false);
    }

    const ModelParams& params() const { return p_; }
    const HermitianBands& bands() const { return bands_; }

    void assemble(double t) {
        const int dim = bands_.dim();
        const complex z = std::polar(1.0, 0.5 * p_.omega_p * t);
        const complex z2 = z * z;
        const complex z4 = z2 * z2;
        const double pump = 2.0 * eval_schedule(p_.beta, t) * z2.real();
        const double shift = p_.omega_c(t) - 0.5 * p_.omega_p;

        auto& b0 = bands_.band(0);
        for (int n = 0; n < dim; ++n) b0[n] = shift * n + kerr0_[n] + pump * pump0_[n];
        auto& b2 = bands_.band(2);
        for (int c = 0; c + 2 < dim; ++c) b2[c] = z2 * (kerr2_[c] + pump * pump2_[c]);
        auto& b4 = bands_.band(4);
        for (int c = 0; c + 4 < dim; ++c) b4[c] = z4 * kerr4_[c];
        if (has_drive_) {
            auto& b1 = bands_.band(1);
            const double e = eval_schedule(drive_, t);
            for (int c = 0; c + 1 < dim; ++c) b1[c] = e * drive1_[c];
        }
    }

    void apply(double t, const StateVector& x, StateVector& y) {
        assemble(t);
        bands_.apply(x.data(), y.data());
    }

    OperatorMatrix matrix(double t) {
        assemble(t);
        return bands_.dense();
    }

private:
    ModelParams p_;
    Schedule drive_;
    bool has_drive_ = false;
    HermitianBands bands_;
    std::vector<double> kerr0_, kerr2_, kerr4_, pump0_, pump2_, drive1_;
};

/// Time-dependent H_RWA(beta(t), Delta(t)) plus optional drive E(t)(a + a^dag).
class RwaGenerator {
public:
    RwaGenerator(ModelParams params, Schedule drive = constant(0.0))
        : p_(std::move(params)), drive_(std::move(drive)), bands_(p_.dim, 2) {
        p_.validate();
        const int dim = p_.dim;
        kerr0_.resize(dim);
        for (int n = 0; n < dim; ++n) kerr0_[n] = -0.5 * p_.chi * n * (n - 1);
        pump2_.resize(std::max(dim - 2, 0));
        for (int c = 0; c + 2 < dim; ++c) pump2_[c] = std::sqrt(double(c + 1) * double(c + 2));
        drive1_ = detail::drive_band(dim);
        has_drive_ = !is_zero(drive_);
        bands_.set_active(1, has_drive_);
    }

    const ModelParams& params() const { return p_; }

    void assemble(double t) {
        const int dim = bands_.dim();
        const double delta = eval_schedule(p_.delta, t);
        const double beta = eval_schedule(p_.beta, t);
        auto& b0 = bands_.band(0);
        for (int n = 0; n < dim; ++n) b0[n] = delta * n + kerr0_[n];
        auto& b2 = bands_.band(2);
        for (int c = 0; c + 2 < dim; ++c) b2[c] = beta * pump2_[c];
        if (has_drive_) {
            auto& b1 = bands_.band(1);
            const double e = eval_schedule(drive_, t);
            for (int c = 0; c + 1 < dim; ++c) b1[c] = e * drive1_[c];
        }
    }

    void apply(double t, const StateVector& x, StateVector& y) {
        assemble(t);
        bands_.apply(x.data(), y.data());
    }

    OperatorMatrix matrix(double t) {
        assemble(t);
        return bands_.dense();
    }

private:
    ModelParams p_;
    Schedule drive_;
    bool has_drive_ = false;
    HermitianBands bands_;
    std::vector<double> kerr0_, pump2_, drive1_;
};

/// Instantaneous H_RWA for the schedules in `p`; the reference for level populations.
inline OperatorMatrix h_rwa_at(double t, const ModelParams& p) {
    return build_h_rwa(eval_schedule(p.delta, t), p.chi, eval_schedule(p.beta, t), p.dim);
}

inline OperatorMatrix h_rwa_rate_at(double t, const ModelParams& p) {
    return build_h_rwa_rate(schedule_rate(p.delta, t), schedule_rate(p.beta, t), p.dim);
}

}  // namespace kpo
