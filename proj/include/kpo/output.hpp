#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/experiments.hpp"
#include "kpo/observables.hpp"
#include "kpo/units.hpp"

// Plain-text result tables. Numbers use 17 significant digits, '.' as decimal
// separator and '\n' line endings so identical runs give identical bytes.

namespace kpo {

inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

}  // namespace detail

/// t_ns, p0..p_{levels-1}, norm_or_trace, then any scenario extras.
inline std::string trajectory_csv(const PointResult& pt) {
    const Trajectory& tr = pt.trajectory;
    const size_t n_pop = [&] {
        size_t n = 0;
        for (const auto& c : pt.columns)
            if (c.size() > 1 && c[0] == 'p' && c.find_first_not_of("0123456789", 1) == std::string::npos) ++n;
        return n;
    }();
    std::vector<std::string> header{"t_ns"};
    for (size_t j = 0; j < n_pop; ++j) header.push_back(pt.columns[j]);
    header.push_back("norm_or_trace");
    for (size_t j = n_pop; j < pt.columns.size(); ++j) header.push_back(pt.columns[j]);

    std::string out;
    detail::append_row(out, header);
    for (size_t i = 0; i < tr.times.size(); ++i) {
        std::vector<std::string> cells{format_number(tr.times[i])};
        const auto& row = tr.rows[i];
        for (size_t j = 0; j < n_pop; ++j) cells.push_back(format_number(j < row.size() ? row[j] : 0.0));
        cells.push_back(format_number(tr.norms[i]));
        for (size_t j = n_pop; j < row.size(); ++j) cells.push_back(format_number(row[j]));
        detail::append_row(out, cells);
    }
    return out;
}

/// sweep_value, fidelity_at_T, tail_mean, tail_std, dt_fs, dim, converged; failed points
/// keep their row with empty statistics so the table length matches the sweep.
inline std::string stats_csv(const std::vector<PointResult>& points) {
    std::string out;
    detail::append_row(out, {"sweep_value", "fidelity_at_T", "tail_mean", "tail_std", "dt_fs", "dim", "converged"});
    for (const auto& p : points) {
        if (p.ok())
            detail::append_row(out, {format_number(p.sweep_value), format_number(p.stats.value_at_T),
                                     format_number(p.stats.tail_mean), format_number(p.stats.tail_std),
                                     format_number(units::ns_to_fs(p.dt)), std::to_string(p.dim),
                                     to_string(p.convergence)});
        else
            detail::append_row(out, {format_number(p.sweep_value), "", "", "", format_number(units::ns_to_fs(p.dt)),
                                     std::to_string(p.dim), "failed"});
    }
    return out;
}

/// x, p, W records.
inline std::string wigner_csv(const WignerGrid& g) {
    std::string out;
    detail::append_row(out, {"x", "p", "W"});
    for (size_t j = 0; j < g.ps.size(); ++j)
        for (size_t i = 0; i < g.xs.size(); ++i)
            detail::append_row(out, {format_number(g.xs[i]), format_number(g.ps[j]), format_number(g.at(int(i), int(j)))});
    return out;
}

/// Writes bytes exactly as given (binary mode keeps '\n' on every platform).
inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + path + "'");
    f << content;
    if (!f) throw Error("failed writing '" + path + "'");
}

}  // namespace kpo
