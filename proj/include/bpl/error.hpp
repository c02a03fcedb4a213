#pragma once

#include <stdexcept>
#include <string>

namespace bpl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Violated precondition or screening rejection (exit code 2).
class PreconditionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class TruncationOverflow : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

// A small divisor fell below its required lower bound.
class ResonanceError : public PreconditionError {
public:
    ResonanceError(const std::string& what, double divisor, double threshold)
        : PreconditionError(what), divisor_(divisor), threshold_(threshold)
    {
    }
    double divisor() const noexcept { return divisor_; }
    double threshold() const noexcept { return threshold_; }

private:
    double divisor_;
    double threshold_;
};

// A near-identity change of variables fails to be a diffeomorphism on the grid.
class DistortionError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

// Numerical divergence or non-convergence (exit code 3).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double last_time = 0.0) : Error(what), last_time_(last_time) {}
    int exit_code() const noexcept override { return 3; }
    double last_time() const noexcept { return last_time_; }

private:
    double last_time_;
};

} // namespace bpl
