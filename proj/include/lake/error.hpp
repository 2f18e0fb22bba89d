#pragma once

#include <stdexcept>
#include <string>

namespace lake {

/// Categories used to map failures onto distinct CLI exit codes.
enum class ErrorKind {
    config_validation = 2,  ///< malformed or out-of-range input
    configuration = 3,      ///< inputs individually valid but mutually inconsistent
    solver = 4,             ///< iterative solver did not converge / broke down
    numerical = 5,          ///< quadrature, extrapolation or time-step failure
    io = 6,
    precondition = 7,       ///< API called outside its documented domain
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config_validation: return "config-validation";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::solver: return "solver";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
    case ErrorKind::precondition: return "precondition";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Thrown when an iterative solve fails; carries the last residual.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : Error(ErrorKind::solver, what), residual_(residual), iterations_(iterations)
    {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Quadrature / extrapolation failure; carries the best estimate reached.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double estimate)
        : Error(ErrorKind::numerical, what), estimate_(estimate)
    {}

    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what)
{
    if (!condition)
        throw Error(kind, what);
}

} // namespace lake
