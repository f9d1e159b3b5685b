#pragma once

#include <stdexcept>
#include <string>

namespace polybite {

/// Base class for all engine errors. `kind()` is a stable machine-readable
/// slug ("malformed-syntax", "placeholder-loss", ...) used in diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

/// Input files, CLI flags, config values.
class ConfigError : public Error {
public:
    ConfigError(std::string kind, const std::string& message)
        : Error(std::move(kind), message) {}
};

/// Library / template parsing. Carries a byte offset when known (-1 otherwise).
class ParseError : public Error {
public:
    ParseError(std::string kind, const std::string& message, long position = -1)
        : Error(std::move(kind), message), position_(position) {}

    long position() const { return position_; }

private:
    long position_;
};

/// Backend transport failures. Transient errors are eligible for retry.
class BackendError : public Error {
public:
    BackendError(std::string kind, const std::string& message, bool transient)
        : Error(std::move(kind), message), transient_(transient) {}

    bool transient() const { return transient_; }

private:
    bool transient_;
};

/// Sanitizer / translator / paraphraser contract failures
/// (unparseable-output, wrong-count, placeholder-loss, duplicate-variants).
class AugmentationError : public Error {
public:
    AugmentationError(std::string kind, const std::string& message)
        : Error(std::move(kind), message) {}
};

/// Metric preconditions (dimension-mismatch, zero-vector, empty-input, ...).
class MetricError : public Error {
public:
    MetricError(std::string kind, const std::string& message)
        : Error(std::move(kind), message) {}
};

}  // namespace polybite
