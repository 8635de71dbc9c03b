#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid caller input (bad dimensions, out-of-range options, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Index sets of a partition intersect.
class OverlapError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A partition is too small or its normalization set is not divisible by r.
class SizeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A matrix that must be inverted is singular or too ill-conditioned.
class RankError : public Error {
public:
    RankError(const std::string& what, double condition)
        : Error(what + " (condition number " + std::to_string(condition) + ")"),
          condition_(condition) {}
    explicit RankError(const std::string& what) : Error(what), condition_(0.0) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class ZeroDenominator : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A combinatorial count does not fit in 64 bits.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Weights handed to a combination do not sum to the identity.
class WeightSumError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateError : public Error {
public:
    using Error::Error;
};

/// Long-format input does not cover every (subject, group) pair.
class UnbalancedError : public Error {
public:
    UnbalancedError(const std::string& what,
                    std::vector<std::pair<std::string, std::string>> missing)
        : Error(what), missing_(std::move(missing)) {}

    const std::vector<std::pair<std::string, std::string>>& missing() const noexcept {
        return missing_;
    }

private:
    std::vector<std::pair<std::string, std::string>> missing_;
};

}  // namespace gve
