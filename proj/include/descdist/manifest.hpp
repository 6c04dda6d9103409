#pragma once

#include <string>
#include <vector>

namespace descdist {

inline constexpr const char* kToolVersion = "0.1.0";

// Record of one CLI run, written as manifest.json next to the outputs:
// command, resolved configuration, seeds, input hashes and output paths.
// Re-running the same manifest on the reference path reproduces the outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_json;  // resolved configuration as a JSON object string
  std::vector<std::string> input_paths;
  std::vector<std::string> output_paths;

  void write(const std::string& dir) const;
};

}  // namespace descdist
