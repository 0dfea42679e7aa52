#pragma once

#include <stdexcept>
#include <string>

namespace clnet {

// User-facing problems: bad config, malformed input files, shape mismatches
// caused by caller data. CLI maps these to exit code 1.
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : UserError {
    using UserError::UserError;
};

struct InputError : UserError {
    using UserError::UserError;
};

struct IngestError : UserError {
    using UserError::UserError;
};

// Latent encoder called with a required sample set empty.
struct EncoderInputError : InputError {
    using InputError::InputError;
};

// Internal failures (divergence, numeric faults). CLI maps these to exit code 2.
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : InternalError {
    using InternalError::InternalError;
};

struct TrainingDiverged : InternalError {
    using InternalError::InternalError;
};

} // namespace clnet
