#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "descdist/descriptor.hpp"
#include "descdist/network.hpp"

// Deterministic discrete-event model of a centralized multi-robot mapping
// loop: robots emit keyframe messages at a fixed rate, the server matches
// each arrival against the other robots' stored keyframes and declares
// inter-robot loops; every byte on the channel is accounted for.

namespace descdist::sim {

// Wire layout (little-endian), documented in the repository README:
//   robot_id u8 | kf_id u32 | timestamp f64 | pose 7xf32 | keypoint_count u16
//   then per keypoint: u f32 | v f32 | descriptor D/8 bytes
// Encoded size is exactly 43 + K*(8 + D/8) bytes.
struct KeyframeMessage {
  std::uint8_t robot_id = 0;
  std::uint32_t kf_id = 0;
  double timestamp = 0;
  std::array<float, 7> pose{0, 0, 0, 1, 0, 0, 0};  // x y z qw qx qy qz
  struct Keypoint {
    float u = 0, v = 0;
    DescriptorBinary descriptor;
  };
  std::vector<Keypoint> keypoints;
};

inline constexpr std::size_t kKeyframeHeaderBytes = 1 + 4 + 8 + 28 + 2;  // 43

std::size_t encoded_size(int keypoints, int descriptor_dim);

std::vector<std::uint8_t> encode_keyframe(const KeyframeMessage& msg);
KeyframeMessage decode_keyframe(std::span<const std::uint8_t> bytes, int descriptor_dim);

// Framed on-disk stream of keyframe messages; the file header carries the
// magic, format version and descriptor dimension the bare messages omit.
inline constexpr int kKeyframeLogVersion = 1;
void write_keyframe_log(const std::string& path, int descriptor_dim,
                        const std::vector<KeyframeMessage>& messages);
std::vector<KeyframeMessage> read_keyframe_log(const std::string& path, int* descriptor_dim = nullptr);

// ---------------------------------------------------------------------------

struct RobotScript {
  int id = 0;
  std::vector<std::int64_t> place_ids;  // one keyframe per entry, in order
};

// Where keyframe descriptors come from: a synthetic channel (per-place random
// descriptors re-observed with bit-flip noise) or a trained descriptor model
// applied to procedurally rendered views of per-place patches.
struct DescriptorSource {
  std::string kind = "synthetic";  // synthetic | model
  int noise_bits = 0;              // synthetic: bits flipped per observation
  std::string checkpoint;          // model: checkpoint path
};

struct Scenario {
  double keyframe_rate_hz = 7.0;
  int keypoints_per_keyframe = 200;
  int descriptor_dim = 64;
  std::uint64_t seed = 1;
  double message_latency_s = 0.0;  // fixed per-message channel latency
  DescriptorSource source;
  std::vector<RobotScript> robots;
};

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

struct MatcherConfig {
  int hamming_threshold = 16;  // max bit distance for a keypoint match
  int min_matches = 12;        // mutual-NN matches needed to declare a loop
};

struct LoopEvent {
  int robot_a = 0;  // the arriving keyframe
  std::uint32_t kf_a = 0;
  int robot_b = 0;  // the stored keyframe it matched
  std::uint32_t kf_b = 0;
  int match_count = 0;
  double declared_time = 0;
};

struct MessageRecord {
  double time = 0;
  int robot_id = 0;
  std::uint32_t kf_id = 0;
  std::size_t bytes = 0;
};

struct RobotTraffic {
  int robot_id = 0;
  std::size_t messages = 0;
  std::size_t bytes_sent = 0;
  double mean_bytes_per_sec = 0;
  double mean_kbit_per_sec = 0;
  double mean_kbyte_per_sec = 0;
};

struct SimReport {
  std::vector<LoopEvent> loops;
  std::vector<MessageRecord> timeline;
  std::vector<RobotTraffic> robots;
  std::size_t total_bytes_sent = 0;
  std::size_t total_bytes_received = 0;  // equals sent on the lossless channel
  double duration_s = 0;
  double precision = 0;
  double recall = 0;
  int ground_truth_loops = 0;

  std::string to_json() const;
  void save_timeline_csv(const std::string& path) const;
};

SimReport run(const Scenario& scenario, const MatcherConfig& matcher);

// Mutual-nearest-neighbor matches between two keypoint sets under a Hamming
// cutoff; ties resolve to the lowest index. Shared with the offline oracle.
int count_mutual_matches(const std::vector<DescriptorBinary>& a,
                         const std::vector<DescriptorBinary>& b, int hamming_threshold);

// Per-robot mean rates from message totals; rate = bytes * rate_hz / count,
// exact for uniform messages.
std::vector<RobotTraffic> bandwidth_report(const std::vector<MessageRecord>& timeline,
                                           double rate_hz);

}  // namespace descdist::sim
