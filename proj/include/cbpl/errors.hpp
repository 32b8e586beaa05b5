#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbpl {

/// Malformed environment or learner configuration (bad layout, inconsistent sizes).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be parsed. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A linear system could not be solved (singular normal equations etc.).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Logged data violates an estimator's requirements (e.g. zero propensity).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cbpl
