#pragma once

#include <stdexcept>
#include <string>

namespace nethop {

//! Malformed or inconsistent input data (files, edge lists, labels).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! Input is well formed but the estimator is undefined on it
//! (no controls, no treated units, empty pattern cell, ...).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! Line-numbered parse failure.
class ParseError : public InputError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace nethop
