#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ddbh {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or algorithm parameter lies outside its admissible domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A caller-side precondition was violated (e.g. a non-stationary amplitude).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Time stepping produced a non-finite or runaway field.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, std::int64_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

/// The domain-wall tracker lost the front or the walls collided.
class TrackingError : public Error {
public:
    using Error::Error;
};

/// A convergence criterion was requested but not reached.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Too few samples for a statistical estimate.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// A resource limit (Fock cutoff, wall-clock budget) was exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ddbh
