#pragma once

#include <stdexcept>
#include <string>

namespace kpo {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDimension : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct ContractViolation : Error {
    using Error::Error;
};
struct DegenerateInput : Error {
    using Error::Error;
};
struct InvalidSchedule : Error {
    using Error::Error;
};
struct InvalidRegime : Error {
    using Error::Error;
};
struct DegenerateLevels : Error {
    using Error::Error;
};
struct CalibrationFailure : Error {
    using Error::Error;
};

/// Non-finite amplitudes appeared during a step.
struct DivergenceError : Error {
    DivergenceError(double t)
        : Error("propagation diverged (NaN/Inf) at t = " + std::to_string(t) + " ns"), time(t) {}
    double time;
};

/// Norm or trace drifted beyond the allowed bound; the step is too coarse.
struct StepSizeError : Error {
    StepSizeError(double t, double drift)
        : Error("norm drift " + std::to_string(drift) + " at t = " + std::to_string(t) +
                " ns exceeds tolerance; reduce dt"),
          time(t), drift(drift) {}
    double time;
    double drift;
};

struct ConfigError : Error {
    ConfigError(const std::string& key, int line, const std::string& what)
        : Error(format(key, line, what)), key(key), line(line) {}
    std::string key;
    int line;

private:
    static std::string format(const std::string& key, int line, const std::string& what) {
        std::string s = "config error";
        if (line > 0) s += " at line " + std::to_string(line);
        if (!key.empty()) s += " [" + key + "]";
        return s + ": " + what;
    }
};

}  // namespace kpo
