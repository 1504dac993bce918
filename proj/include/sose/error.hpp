#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sose {

// Base of every error thrown by the library. The CLI maps subclasses onto
// process exit codes (see exit_code()).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid or inconsistent parameters (exit code 2).
class ParameterError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Index outside the domain of a random family.
class RangeError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// Operand shapes do not agree.
class DimensionError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/// A matrix expected to have full column rank does not.
class RankError : public Error {
public:
    RankError(const std::string& what, std::ptrdiff_t numerical_rank)
        : Error(what), rank_(numerical_rank) {}
    std::ptrdiff_t numerical_rank() const noexcept { return rank_; }
    int exit_code() const noexcept override { return 2; }

private:
    std::ptrdiff_t rank_;
};

/// Numerical failure in a moment computation (overflow at high order).
class NumericError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written (exit code 3).
class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public IoError {
public:
    ParseError(const std::string& what, std::size_t line)
        : IoError(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace sose
