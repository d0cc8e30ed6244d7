#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bipembed {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BipartiteViolation : public Error {
public:
    using Error::Error;
};

class EmptyGraphError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class NoNegativesError : public Error {
public:
    using Error::Error;
};

class ExhaustionError : public Error {
public:
    using Error::Error;
};

class NoNeighborError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Raised when an operation receives nodes of the wrong part.
class TypeError : public Error {
public:
    using Error::Error;
};

class MalformedRecordError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error("diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DegenerateClassifierError : public Error {
public:
    using Error::Error;
};

class EmptyTaskError : public Error {
public:
    using Error::Error;
};

}  // namespace bipembed
