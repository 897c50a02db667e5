#ifndef HYBRIDSQ_ERRORS_HPP
#define HYBRIDSQ_ERRORS_HPP

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridsq {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes, so new failure kinds should derive from one of the three
/// families below rather than from this class directly.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// -- parameter / validation family (CLI exit code 2) -------------------------

class InvalidParameter : public Error
{
public:
    using Error::Error;
};

class DomainError : public InvalidParameter
{
public:
    using InvalidParameter::InvalidParameter;
};

/// 1 + 4 Lambda'/omega_m <= 0: the squeezing transformation does not exist.
class TransformDomainError : public DomainError
{
public:
    using DomainError::DomainError;
};

class DimensionError : public InvalidParameter
{
public:
    using InvalidParameter::InvalidParameter;
};

class StateError : public Error
{
public:
    using Error::Error;
};

// -- solver family (CLI exit code 3) -----------------------------------------

class ConvergenceError : public Error
{
public:
    ConvergenceError(const std::string &what, double last_iterate,
                     double last_residual)
        : Error(what + " (last iterate " + std::to_string(last_iterate) +
                ", residual " + std::to_string(last_residual) + ")"),
          last_iterate_(last_iterate), last_residual_(last_residual)
    {
    }

    double last_iterate() const noexcept { return last_iterate_; }
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_iterate_;
    double last_residual_;
};

/// The tracked amplitude branch ends (fold) or has no real root.
class BranchError : public Error
{
public:
    using Error::Error;
};

/// Trace-constrained Liouvillian system is singular or the steady state is
/// not unique.
class DegeneracyError : public Error
{
public:
    using Error::Error;
};

// -- dynamical family (CLI exit code 4) --------------------------------------

class InstabilityError : public Error
{
public:
    InstabilityError(const std::string &what,
                     std::vector<std::complex<double>> offending)
        : Error(what), offending_(std::move(offending))
    {
    }

    const std::vector<std::complex<double>> &offending_eigenvalues() const
    {
        return offending_;
    }

private:
    std::vector<std::complex<double>> offending_;
};

} // namespace hybridsq

#endif
