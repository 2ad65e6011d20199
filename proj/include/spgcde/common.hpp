#pragma once
// Error taxonomy and process exit codes shared across the library and CLI.

#include <stdexcept>
#include <string>

namespace spgcde {

// Exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCheckpoint = 4;

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad hyperparameters, geometry, preset invariants.
struct ConfigError : Error {
    using Error::Error;
};

// Problems with input data: stores, shapes, labels.
struct DataError : Error {
    using Error::Error;
};

// Checkpoint compatibility or integrity failures.
struct CheckpointError : Error {
    using Error::Error;
};

struct BadConfig : ConfigError {
    using ConfigError::ConfigError;
};
struct BadGeometry : ConfigError {
    using ConfigError::ConfigError;
};
struct BadSpec : ConfigError {
    using ConfigError::ConfigError;
};

struct ShapeMismatch : DataError {
    using DataError::DataError;
};
struct MissingPrior : DataError {
    using DataError::DataError;
};
struct CorruptCase : DataError {
    using DataError::DataError;
};
struct BadLabels : DataError {
    using DataError::DataError;
};

struct CheckpointMismatch : CheckpointError {
    using CheckpointError::CheckpointError;
};

}  // namespace spgcde
