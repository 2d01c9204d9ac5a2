#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "kpo/errors.hpp"

namespace kpo {

namespace schedule {

struct Constant {
    double value = 0.0;
};

/// amplitude * t / duration, then held at amplitude.
struct LinearRampHold {
    double amplitude;
    double duration;
};

/// amplitude * (1 - t / duration), then zero.
struct LinearDecay {
    double amplitude;
    double duration;
};

/// amplitude * sin^2(pi t / duration), zero afterwards.
struct SinSquaredPulse {
    double amplitude;
    double duration;
};

/// amplitude * sin(pi t / duration), zero afterwards.
struct SineEnvelope {
    double amplitude;
    double duration;
};

}  // namespace schedule

/// Closed-form time-dependent control in rad/ns.
using Schedule = std::variant<schedule::Constant, schedule::LinearRampHold, schedule::LinearDecay,
                              schedule::SinSquaredPulse, schedule::SineEnvelope>;

namespace detail {

template <class S>
void check_duration(const S& s) {
    if (!(s.duration > 0)) throw InvalidSchedule("schedule duration must be > 0");
}

inline void validate(const Schedule& s) {
    std::visit(
        [](const auto& v) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(v)>, schedule::Constant>) check_duration(v);
        },
        s);
}

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

}  // namespace detail

inline Schedule constant(double value) { return schedule::Constant{value}; }

inline Schedule linear_ramp_hold(double amplitude, double duration) {
    Schedule s = schedule::LinearRampHold{amplitude, duration};
    detail::validate(s);
    return s;
}

inline Schedule linear_decay(double amplitude, double duration) {
    Schedule s = schedule::LinearDecay{amplitude, duration};
    detail::validate(s);
    return s;
}

inline Schedule sin2_pulse(double amplitude, double duration) {
    Schedule s = schedule::SinSquaredPulse{amplitude, duration};
    detail::validate(s);
    return s;
}

/// R_z drive envelope pi^2 / (8 T_g sqrt(2 beta/chi)) sin(pi t/T_g), optionally scaled.
inline Schedule rz_envelope(double beta, double chi, double gate_time, double scale = 1.0) {
    if (!(beta > 0) || !(chi > 0)) throw InvalidArgument("rz envelope needs beta > 0 and chi > 0");
    if (!(gate_time > 0)) throw InvalidSchedule("schedule duration must be > 0");
    const double pi = std::numbers::pi;
    double amp = scale * pi * pi / (8.0 * gate_time * std::sqrt(2.0 * beta / chi));
    return schedule::SineEnvelope{amp, gate_time};
}

inline double eval_schedule(const Schedule& s, double t) {
    using namespace schedule;
    const double pi = std::numbers::pi;
    return std::visit(
        detail::overloaded{
            [](const Constant& c) { return c.value; },
            [t](const LinearRampHold& r) { return t <= r.duration ? r.amplitude * t / r.duration : r.amplitude; },
            [t](const LinearDecay& d) { return t <= d.duration ? d.amplitude * (1.0 - t / d.duration) : 0.0; },
            [t, pi](const SinSquaredPulse& p) {
                if (t > p.duration) return 0.0;
                double s = std::sin(pi * t / p.duration);
                return p.amplitude * s * s;
            },
            [t, pi](const SineEnvelope& e) {
                return t <= e.duration ? e.amplitude * std::sin(pi * t / e.duration) : 0.0;
            },
        },
        s);
}

/// d/dt of the schedule; one-sided (left) value at kinks.
inline double schedule_rate(const Schedule& s, double t) {
    using namespace schedule;
    const double pi = std::numbers::pi;
    return std::visit(
        detail::overloaded{
            [](const Constant&) { return 0.0; },
            [t](const LinearRampHold& r) { return t <= r.duration ? r.amplitude / r.duration : 0.0; },
            [t](const LinearDecay& d) { return t <= d.duration ? -d.amplitude / d.duration : 0.0; },
            [t, pi](const SinSquaredPulse& p) {
                if (t > p.duration) return 0.0;
                return p.amplitude * pi / p.duration * std::sin(2.0 * pi * t / p.duration);
            },
            [t, pi](const SineEnvelope& e) {
                return t <= e.duration ? e.amplitude * pi / e.duration * std::cos(pi * t / e.duration) : 0.0;
            },
        },
        s);
}

inline double peak_value(const Schedule& s) {
    using namespace schedule;
    return std::visit(detail::overloaded{
                          [](const Constant& c) { return std::abs(c.value); },
                          [](const auto& v) { return std::abs(v.amplitude); },
                      },
                      s);
}

inline bool is_zero(const Schedule& s) { return peak_value(s) == 0.0; }

/// Rotation angle phi = 4 sqrt(2 beta/chi) * integral of E(t) over the gate window.
inline double rz_phase(const Schedule& s, double beta, double chi) {
    const auto* env = std::get_if<schedule::SineEnvelope>(&s);
    if (!env) throw InvalidArgument("rz_phase requires a sine-envelope schedule");
    double integral = env->amplitude * 2.0 * env->duration / std::numbers::pi;
    return 4.0 * std::sqrt(2.0 * beta / chi) * integral;
}

inline std::string describe(const Schedule& s) {
    using namespace schedule;
    return std::visit(detail::overloaded{
                          [](const Constant& c) { return "constant(" + std::to_string(c.value) + ")"; },
                          [](const LinearRampHold& v) {
                              return "linear-ramp-hold(" + std::to_string(v.amplitude) + ", " +
                                     std::to_string(v.duration) + ")";
                          },
                          [](const LinearDecay& v) {
                              return "linear-decay(" + std::to_string(v.amplitude) + ", " +
                                     std::to_string(v.duration) + ")";
                          },
                          [](const SinSquaredPulse& v) {
                              return "sin2-pulse(" + std::to_string(v.amplitude) + ", " +
                                     std::to_string(v.duration) + ")";
                          },
                          [](const SineEnvelope& v) {
                              return "sine-envelope(" + std::to_string(v.amplitude) + ", " +
                                     std::to_string(v.duration) + ")";
                          },
                      },
                      s);
}

}  // namespace kpo
