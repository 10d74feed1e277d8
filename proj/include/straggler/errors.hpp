#pragma once

#include <stdexcept>
#include <string>

namespace straggler {

/// Thrown when an identifier lies outside the structure's declared universe [0, n_bound].
class IdentifierOutOfRange : public std::out_of_range {
public:
    explicit IdentifierOutOfRange(const std::string& what) : std::out_of_range(what) {}
};

/// Thrown when elements or structures built over different parameters are mixed.
class ParamsMismatch : public std::invalid_argument {
public:
    explicit ParamsMismatch(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown on division of a field value by an integer divisible by the characteristic.
class DivisionByCharacteristic : public std::domain_error {
public:
    explicit DivisionByCharacteristic(const std::string& what) : std::domain_error(what) {}
};

/// Thrown on malformed wire bytes or stream files. `line` is 1-based for text inputs, 0 otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? ("line " + std::to_string(line) + ": " + what) : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace straggler
