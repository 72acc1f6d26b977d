#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ssg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its mathematical domain (e.g. a non-positive rate).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Infeasible generator or configuration specification.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Matrix factorization failed (non positive-definite input).
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// A nodewise regression interpolated its response exactly.
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

/// Numeric failure that is not a factorization problem.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Data rejected by a preprocessing step.
class PreprocessError : public Error {
public:
    using Error::Error;
};

/// Every cell of a calibration grid failed.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Coordinate descent hit its sweep limit. Carries the last iterate.
class IterationLimitError : public Error {
public:
    IterationLimitError(const std::string& what, Eigen::VectorXd last_iterate, double gap_estimate)
        : Error(what), last_iterate_(std::move(last_iterate)), gap_estimate_(gap_estimate) {}

    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    /// Upper bound on objective suboptimality from the minimum-norm subgradient;
    /// infinite when the problem is not strongly convex.
    double gap_estimate() const noexcept { return gap_estimate_; }

private:
    Eigen::VectorXd last_iterate_;
    double gap_estimate_;
};

}  // namespace ssg
