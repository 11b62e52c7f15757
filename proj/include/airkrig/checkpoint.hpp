#pragma once

#include <stdexcept>
#include <string>

#include "airkrig/model.hpp"

namespace airkrig {

/// Thrown when a checkpoint's parameters do not match the model's shapes.
struct CheckpointMismatchError : std::runtime_error {
    explicit CheckpointMismatchError(const std::string& what) : std::runtime_error(what) {}
};

/// Binary checkpoint: u32 format version, u32 parameter count, then per
/// parameter: u32 name length, name bytes, u32 rank, u32 dims, float32
/// payload. Everything little-endian.
void save_checkpoint(const std::string& path, const ModelParams& params);

/// Loads parameter values by name into an existing parameter set.
/// Throws CheckpointMismatchError on unknown names or shape disagreement.
void load_checkpoint(const std::string& path, ModelParams& params);

}  // namespace airkrig
