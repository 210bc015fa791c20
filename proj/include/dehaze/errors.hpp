#pragma once

#include <stdexcept>
#include <string>

namespace dehaze {

// Invalid argument values (negative beta, even patch size, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Mismatched tensor shapes.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dataset/file ingestion problems; message names the offending path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt or truncated checkpoint payloads.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite losses or parameters during optimization.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dehaze
