#pragma once

#include <stdexcept>
#include <string>

namespace mcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A physical parameter violates its bound.
class InvalidParameter : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Model state left its admissible region; signals a broken step.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

/// Raw parameter vector does not match the configuration's active set.
class ConfigMismatch : public Error {
public:
    using Error::Error;
};

/// Observations carry no information (e.g. zero variance).
class DegenerateData : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Daily series has a missing day.
class GapError : public Error {
public:
    using Error::Error;
};

/// Requested date range is not covered by the data.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during training.
class DivergedRun : public Error {
public:
    using Error::Error;
};

/// Every training run of a stage diverged.
class AllRunsFailed : public Error {
public:
    using Error::Error;
};

/// Simulation failure carrying the offending time index.
class SimulationError : public Error {
public:
    SimulationError(std::size_t index, const std::string& what)
        : Error("step " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace mcp
