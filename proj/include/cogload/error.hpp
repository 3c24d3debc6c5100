#pragma once

#include <stdexcept>
#include <string>

namespace cogload {

/// Root of the library's exception hierarchy. The CLI maps each subclass to an
/// exit code, so new failure kinds should derive from one of the three
/// category classes below rather than from Error directly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad parameters or configuration (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-convergence, rank deficiency (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or unusable input data (exit code 4).
class DataError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class NonConvergence : public NumericalError {
public:
    NonConvergence(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class RankDeficient : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TooFewClusters : public DataError {
public:
    using DataError::DataError;
};

class DegenerateDocument : public DataError {
public:
    using DataError::DataError;
};

}  // namespace cogload
