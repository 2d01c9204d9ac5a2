#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <utility>
#include <vector>

#include "kpo/errors.hpp"

namespace kpo {

using complex = std::complex<double>;

/// Dense operator in a truncated Fock basis |0>..|dim-1>.
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using DensityMatrix = Eigen::MatrixXcd;

/// Number of retained Fock levels.
class FockDim {
public:
    explicit FockDim(int dim) : dim_(dim) {
        if (dim < 2) throw InvalidDimension("Fock dimension must be >= 2, got " + std::to_string(dim));
    }
    int value() const { return dim_; }
    operator int() const { return dim_; }
    friend bool operator==(FockDim, FockDim) = default;

private:
    int dim_;
};

enum class Parity { even, odd };

inline const char* to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

inline OperatorMatrix annihilation(FockDim dim) {
    OperatorMatrix a = OperatorMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

inline OperatorMatrix creation(FockDim dim) { return annihilation(dim).adjoint(); }

inline OperatorMatrix number_operator(FockDim dim) {
    OperatorMatrix n = OperatorMatrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) n(k, k) = double(k);
    return n;
}

inline OperatorMatrix identity(FockDim dim) { return OperatorMatrix::Identity(dim, dim); }

inline StateVector fock_state(int n, FockDim dim) {
    if (n < 0 || n >= dim) throw InvalidArgument("Fock index out of range");
    StateVector v = StateVector::Zero(dim);
    v(n) = 1.0;
    return v;
}

/// A state obtained from an infinite-dimensional series cut off at dim.
/// `captured_norm` is the norm before renormalization.
struct TruncatedState {
    StateVector state;
    double captured_norm = 1.0;
    bool truncation_warning() const { return captured_norm < 0.999; }
};

namespace detail {

// e^{-|alpha|^2/2} alpha^n / sqrt(n!) for n < dim, no renormalization.
inline StateVector coherent_series(complex alpha, int dim) {
    StateVector c(dim);
    c(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < dim; ++n) c(n) = c(n - 1) * alpha / std::sqrt(double(n));
    return c;
}

}  // namespace detail

/// Coherent state |alpha>, renormalized after truncation.
/// A cutoff with |alpha|^2 + 6|alpha| + 10 <= dim keeps the lost weight negligible.
inline TruncatedState coherent_state(complex alpha, FockDim dim) {
    StateVector c = detail::coherent_series(alpha, dim);
    double norm = c.norm();
    return {c / norm, norm};
}

namespace detail {

inline StateVector cat(double alpha, int dim, double sign) {
    if (alpha < 0) throw InvalidArgument("cat amplitude must be >= 0");
    StateVector plus = coherent_series(alpha, dim);
    StateVector minus = coherent_series(-alpha, dim);
    // N^2 = 2(1 +- e^{-2 alpha^2})
    double n2 = sign > 0 ? 2.0 * (1.0 + std::exp(-2.0 * alpha * alpha))
                         : -2.0 * std::expm1(-2.0 * alpha * alpha);
    StateVector v = (minus + sign * plus) / std::sqrt(n2);
    return v / v.norm();
}

}  // namespace detail

/// (|-alpha> + |alpha>)/N+, supported on even Fock levels.
inline StateVector even_cat(double alpha, FockDim dim) { return detail::cat(alpha, dim, +1.0); }

/// (|-alpha> - |alpha>)/N-, supported on odd Fock levels. Undefined at alpha = 0.
inline StateVector odd_cat(double alpha, FockDim dim) {
    if (alpha == 0.0) throw DegenerateInput("odd cat state is the zero vector at alpha = 0");
    return detail::cat(alpha, dim, -1.0);
}

inline std::pair<StateVector, StateVector> cat_states(double alpha, FockDim dim) {
    return {even_cat(alpha, dim), odd_cat(alpha, dim)};
}

inline std::pair<OperatorMatrix, OperatorMatrix> parity_projectors(FockDim dim) {
    OperatorMatrix even = OperatorMatrix::Zero(dim, dim);
    for (int n = 0; n < dim; n += 2) even(n, n) = 1.0;
    return {even, identity(dim) - even};
}

/// Weight of a vector on even Fock levels.
inline double even_weight(const StateVector& v) {
    double w = 0.0;
    for (Eigen::Index n = 0; n < v.size(); n += 2) w += std::norm(v(n));
    return w;
}

inline double hermiticity_defect(const OperatorMatrix& m) {
    double scale = m.norm();
    double defect = (m - m.adjoint()).norm();
    return scale > 0 ? defect / scale : defect;
}

/// Eigen-decomposition with energies sorted descending.
struct EigenSystem {
    std::vector<double> energies;
    std::vector<StateVector> states;
    std::vector<Parity> parities;

    int size() const { return int(energies.size()); }
};

namespace detail {

// Rotates v so that its largest-magnitude component is real positive.
inline void fix_phase(StateVector& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs2().maxCoeff(&imax);
    complex c = v(imax);
    if (std::abs(c) > 0) v *= std::conj(c) / std::abs(c);
}

struct Level {
    double energy;
    StateVector state;
    Parity parity;
};

inline void collect(const OperatorMatrix& block, const std::vector<int>& index, int dim,
                    std::vector<Level>& out) {
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(block);
    if (solver.info() != Eigen::Success) throw Error("Hermitian eigensolver failed to converge");
    for (Eigen::Index j = 0; j < block.rows(); ++j) {
        StateVector v = StateVector::Zero(dim);
        for (size_t i = 0; i < index.size(); ++i) v(index[i]) = solver.eigenvectors()(Eigen::Index(i), j);
        fix_phase(v);
        Parity p = even_weight(v) >= 0.5 ? Parity::even : Parity::odd;
        out.push_back({solver.eigenvalues()(j), std::move(v), p});
    }
}

}  // namespace detail

/// Full spectrum of a Hermitian matrix, highest energy first.
///
/// Matrices that commute with photon-number parity are diagonalized one parity
/// sector at a time, so every eigenvector has exactly one parity even when the
/// top levels are quasi-degenerate.
inline EigenSystem hermitian_eigh(const OperatorMatrix& m, double hermitian_tol = 1e-12) {
    if (m.rows() != m.cols()) throw InvalidDimension("eigensolver needs a square matrix");
    const int dim = int(m.rows());
    if (hermiticity_defect(m) > hermitian_tol)
        throw ContractViolation("matrix is not Hermitian within tolerance");

    double cross = 0.0;
    for (int r = 0; r < dim; ++r)
        for (int c = (r + 1) % 2; c < dim; c += 2) cross = std::max(cross, std::abs(m(r, c)));
    const bool parity_symmetric = cross <= 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff());

    std::vector<detail::Level> levels;
    levels.reserve(dim);
    if (parity_symmetric) {
        for (int start : {0, 1}) {
            std::vector<int> idx;
            for (int n = start; n < dim; n += 2) idx.push_back(n);
            OperatorMatrix block(idx.size(), idx.size());
            for (size_t i = 0; i < idx.size(); ++i)
                for (size_t j = 0; j < idx.size(); ++j) block(i, j) = m(idx[i], idx[j]);
            detail::collect(block, idx, dim, levels);
        }
    } else {
        std::vector<int> idx(dim);
        std::iota(idx.begin(), idx.end(), 0);
        detail::collect(m, idx, dim, levels);
    }
    std::stable_sort(levels.begin(), levels.end(),
                     [](const auto& a, const auto& b) { return a.energy > b.energy; });

    EigenSystem es;
    for (auto& l : levels) {
        es.energies.push_back(l.energy);
        es.states.push_back(std::move(l.state));
        es.parities.push_back(l.parity);
    }
    return es;
}

}  // namespace kpo
