#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dna {

// Shape, range or schema violation in caller-supplied data.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or degenerate norms encountered during computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or missing configuration key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace dna
