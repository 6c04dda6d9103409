#pragma once

#include <stdexcept>
#include <string>

namespace descdist {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape violations.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed or inconsistent on-disk datasets.
struct DatasetError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint problems, split so callers can tell apart a damaged file,
// a format from another tool version, and a parameter-layout mismatch.
struct CheckpointError : Error {
  using Error::Error;
};
struct CheckpointCorruptError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointShapeError : CheckpointError {
  using CheckpointError::CheckpointError;
};

// Wire-format decode failures (keyframe messages, descriptor dumps).
struct CodecError : Error {
  using Error::Error;
};

template <class E = Error>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

}  // namespace descdist
