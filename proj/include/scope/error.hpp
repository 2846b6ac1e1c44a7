#pragma once

#include <stdexcept>
#include <string>

namespace scope {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input rejected because of a shape or range violation.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Weighted loss requested on a batch whose weights are all zero.
class DegenerateBatch : public Error {
public:
    using Error::Error;
};

/// Non-finite gradients or loss encountered during optimisation.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

/// Class statistics cannot be fitted (fewer than two members).
class StatsUndefined : public Error {
public:
    using Error::Error;
};

/// Cosine similarity requested for a zero-norm vector.
class UndefinedSimilarity : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV or JSON input. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid run configuration. `field()` is the dotted path of the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace scope
