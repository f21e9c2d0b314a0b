#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hdinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid argument or configuration (bad flag value, negative lambda, ...).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain_error"; }
};

/// Input data fails validation (missing cells, constant columns, bad response).
class DataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "data_error"; }
};

/// Numerical failure. The CLI maps these to a distinct exit code.
class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical_error"; }
};

class SingularHessianError : public NumericalError {
public:
    using NumericalError::NumericalError;
    const char* kind() const noexcept override { return "singular_hessian"; }
};

/// An iterative solver stopped without converging. Carries the last iterate.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate)
        : NumericalError(what), last_iterate_(std::move(last_iterate)) {}
    const char* kind() const noexcept override { return "non_convergence"; }
    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

private:
    Eigen::VectorXd last_iterate_;
};

}  // namespace hdinf
