#pragma once

#include <stdexcept>
#include <string>

namespace cbound {

/// Invalid parameters or configuration. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data (malformed trace, out-of-range symbol, missing file). Exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed line in a Lackey trace; carries the 1-based line number.
class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// NaN, divergence or other numerical breakdown. Exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cbound
