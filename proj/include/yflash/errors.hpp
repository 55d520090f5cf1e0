#pragma once

#include <stdexcept>
#include <string>

namespace yflash {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set or state violates its invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A voltage or argument lies outside the range allowed by an operating mode.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A precondition of an operation does not hold (e.g. array too small).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// DC operating point could not be resolved.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Transient integration failed (step underflow or non-convergent implicit solve).
class IntegratorError : public Error {
public:
    IntegratorError(const std::string& what, double time)
        : Error(what), time_(time) {}
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

/// A pulse loop did not reach its target within the allowed number of pulses.
class BudgetError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace yflash
