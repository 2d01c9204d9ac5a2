#pragma once

#include <numbers>

/// Internal units are ns for time and rad/ns for angular frequency.
/// Inputs follow the usual f/2pi convention in MHz, GHz or kHz.
namespace kpo::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double from_mhz(double f_over_2pi) { return two_pi * f_over_2pi * 1e-3; }
constexpr double from_ghz(double f_over_2pi) { return two_pi * f_over_2pi; }
constexpr double from_khz(double f_over_2pi) { return two_pi * f_over_2pi * 1e-6; }

constexpr double to_mhz(double omega) { return omega / two_pi * 1e3; }
constexpr double to_ghz(double omega) { return omega / two_pi; }
constexpr double to_khz(double omega) { return omega / two_pi * 1e6; }

constexpr double fs_to_ns(double fs) { return fs * 1e-6; }
constexpr double ns_to_fs(double ns) { return ns * 1e6; }

}  // namespace kpo::units
