#pragma once

#include <stdexcept>
#include <string>

namespace hsprobe {

/// Bad or inconsistent configuration (shape mismatch, invalid hyperparameter).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid data fed to an otherwise well-configured operation.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A metric that is mathematically undefined for the given inputs
/// (e.g. ROC-AUC with a single class present).
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

/// Transport-level judge failure (network, endpoint down). Retriable.
struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Judge produced a response that could not be parsed after all retries.
/// Carries the raw response text for postmortem inspection.
struct MalformedVerdict : std::runtime_error {
    MalformedVerdict(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_text(std::move(raw)) {}
    std::string raw_text;
};

/// Judge failure that cannot be retried (offline cache miss, abort policy).
struct JudgeError : std::runtime_error {
    explicit JudgeError(const std::string& what) : std::runtime_error(what) {}
};

/// Training aborted (non-finite loss, diverged optimization).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hsprobe
