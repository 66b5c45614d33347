#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hakf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, mismatched dimensions, incompatible models.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Singular matrices, non-finite results. Carries the filter step when known.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, std::optional<std::size_t> step = std::nullopt)
        : Error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

    std::optional<std::size_t> step() const { return step_; }

private:
    std::optional<std::size_t> step_;
};

/// Filter state diverged (non-finite estimate) during a run.
class DivergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Operation called on an object in the wrong state (e.g. empty window).
class StateError : public Error {
public:
    using Error::Error;
};

/// Curvature is undefined for a stationary (zero-velocity) window.
class UndefinedCurvatureError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Malformed input file; `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Input file is well-formed but violates a semantic contract (e.g. jittered timestamps).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Training finished but missed its accuracy bar.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, double achieved)
        : Error(what + " (achieved " + std::to_string(achieved) + ")"), achieved_(achieved) {}

    double achieved() const { return achieved_; }

private:
    double achieved_;
};

}  // namespace hakf
