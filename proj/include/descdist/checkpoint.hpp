#pragma once

#include <map>
#include <string>

#include "descdist/network.hpp"

namespace descdist {

// Checkpoint file: a human-readable text header describing the network and
// training metadata, followed by all parameter/buffer tensors as a
// little-endian float32 blob in header order. Layout is documented in the
// repository README.

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::map<std::string, std::string> fields;  // stage, epoch, seed, loss config, ...

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = fields.find(key);
    return it == fields.end() ? fallback : it->second;
  }
};

void save_checkpoint(Network& net, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  Network net;
  CheckpointMeta meta;
};

// Rebuilds the network from the stored spec and fills every tensor.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Loads parameters from `path` into an existing network; throws
// CheckpointShapeError when the stored index does not match the network.
CheckpointMeta load_checkpoint_into(Network& net, const std::string& path);

}  // namespace descdist
