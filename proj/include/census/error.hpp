#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace census {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate a precondition (mixed images,
/// non-positive radius, bad fractions, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A value parsed correctly but breaks a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace census
