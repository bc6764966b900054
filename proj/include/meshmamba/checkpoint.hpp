#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "meshmamba/model.hpp"

namespace meshmamba {

struct CheckpointState {
  int epoch = 0;
  std::string rng_state;   // textual mt19937_64 state
  std::string train_json;  // training config snapshot, may be empty
};

// Binary container: "MMCK", u32 version, u64 manifest length, JSON manifest
// (model config, state, tensor names and shapes), then each tensor as
// little-endian float64 in manifest order. Written atomically.
void save_checkpoint(const MeshMambaModel& model, const CheckpointState& state, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<MeshMambaModel> model;
  CheckpointState state;
};

// Rebuilds the model from the stored config and restores every tensor.
// Throws ErrorKind::Format on a malformed file or a tensor mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace meshmamba
