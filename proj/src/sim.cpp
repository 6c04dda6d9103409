#include "descdist/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "descdist/checkpoint.hpp"
#include "descdist/patches.hpp"

namespace descdist::sim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Wire codec

std::size_t encoded_size(int keypoints, int descriptor_dim) {
  return kKeyframeHeaderBytes +
         static_cast<std::size_t>(keypoints) * (8 + static_cast<std::size_t>(descriptor_dim) / 8);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& off) {
  require<CodecError>(off + sizeof(T) <= bytes.size(), "keyframe message truncated");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void check_quaternion(const std::array<float, 7>& pose) {
  const double n = std::sqrt(static_cast<double>(pose[3]) * pose[3] +
                             static_cast<double>(pose[4]) * pose[4] +
                             static_cast<double>(pose[5]) * pose[5] +
                             static_cast<double>(pose[6]) * pose[6]);
  require<CodecError>(std::abs(n - 1.0) <= 1e-3,
                      "keyframe pose quaternion is not unit norm (|q| = " + std::to_string(n) + ")");
}

}  // namespace

std::vector<std::uint8_t> encode_keyframe(const KeyframeMessage& msg) {
  require<CodecError>(msg.keypoints.size() <= 65535, "keyframe has more than 65535 keypoints");
  check_quaternion(msg.pose);
  int dim = 0;
  if (!msg.keypoints.empty()) {
    dim = msg.keypoints.front().descriptor.dim;
    require<CodecError>(dim > 0 && dim % 8 == 0,
                        "keyframe descriptors must have a dimension divisible by 8");
  }
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(static_cast<int>(msg.keypoints.size()), dim));
  put(out, msg.robot_id);
  put(out, msg.kf_id);
  put(out, msg.timestamp);
  for (float v : msg.pose) put(out, v);
  put(out, static_cast<std::uint16_t>(msg.keypoints.size()));
  for (const auto& kp : msg.keypoints) {
    require<CodecError>(kp.descriptor.dim == dim, "keyframe mixes descriptor dimensions");
    put(out, kp.u);
    put(out, kp.v);
    out.insert(out.end(), kp.descriptor.bits.begin(), kp.descriptor.bits.end());
  }
  return out;
}

KeyframeMessage decode_keyframe(std::span<const std::uint8_t> bytes, int descriptor_dim) {
  require<CodecError>(descriptor_dim > 0 && descriptor_dim % 8 == 0,
                      "descriptor dimension must be positive and divisible by 8");
  KeyframeMessage msg;
  std::size_t off = 0;
  msg.robot_id = take<std::uint8_t>(bytes, off);
  msg.kf_id = take<std::uint32_t>(bytes, off);
  msg.timestamp = take<double>(bytes, off);
  for (auto& v : msg.pose) v = take<float>(bytes, off);
  check_quaternion(msg.pose);
  const auto count = take<std::uint16_t>(bytes, off);
  const std::size_t desc_bytes = static_cast<std::size_t>(descriptor_dim) / 8;
  require<CodecError>(bytes.size() == encoded_size(count, descriptor_dim),
                      "keyframe message length " + std::to_string(bytes.size()) +
                          " does not match declared layout (" +
                          std::to_string(encoded_size(count, descriptor_dim)) + " bytes)");
  msg.keypoints.resize(count);
  for (auto& kp : msg.keypoints) {
    kp.u = take<float>(bytes, off);
    kp.v = take<float>(bytes, off);
    kp.descriptor.dim = descriptor_dim;
    kp.descriptor.bits.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                              bytes.begin() + static_cast<std::ptrdiff_t>(off + desc_bytes));
    off += desc_bytes;
  }
  return msg;
}

void write_keyframe_log(const std::string& path, int descriptor_dim,
                        const std::vector<KeyframeMessage>& messages) {
  std::ofstream out(path, std::ios::binary);
  require<Error>(out.good(), "cannot open keyframe log for writing: " + path);
  out.write("DDKFLOG1", 8);
  const std::uint16_t version = kKeyframeLogVersion;
  const std::uint16_t dim = static_cast<std::uint16_t>(descriptor_dim);
  const std::uint32_t count = static_cast<std::uint32_t>(messages.size());
  out.write(reinterpret_cast<const char*>(&version), 2);
  out.write(reinterpret_cast<const char*>(&dim), 2);
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& m : messages) {
    const auto bytes = encode_keyframe(m);
    const std::uint32_t len = static_cast<std::uint32_t>(bytes.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  require<Error>(out.good(), "keyframe log write failed: " + path);
}

std::vector<KeyframeMessage> read_keyframe_log(const std::string& path, int* descriptor_dim) {
  std::ifstream in(path, std::ios::binary);
  require<CodecError>(in.good(), "cannot open keyframe log: " + path);
  char magic[8];
  in.read(magic, 8);
  require<CodecError>(in.gcount() == 8 && std::memcmp(magic, "DDKFLOG1", 8) == 0,
                      "not a keyframe log (bad magic): " + path);
  std::uint16_t version = 0, dim = 0;
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&version), 2);
  in.read(reinterpret_cast<char*>(&dim), 2);
  in.read(reinterpret_cast<char*>(&count), 4);
  require<CodecError>(in.good(), "keyframe log header truncated: " + path);
  require<CodecError>(version == kKeyframeLogVersion,
                      "unsupported keyframe log version " + std::to_string(version));
  std::vector<KeyframeMessage> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    require<CodecError>(in.good(), "keyframe log truncated at message " + std::to_string(i));
    std::vector<std::uint8_t> buf(len);
    in.read(reinterpret_cast<char*>(buf.data()), len);
    require<CodecError>(in.gcount() == static_cast<std::streamsize>(len),
                        "keyframe log truncated at message " + std::to_string(i));
    out.push_back(decode_keyframe(buf, dim));
  }
  if (descriptor_dim) *descriptor_dim = dim;
  return out;
}

// ---------------------------------------------------------------------------
// Scenario files

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  require<ConfigError>(in.good(), "cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario file is not valid JSON: " + std::string(e.what()));
  }
  Scenario s;
  s.keyframe_rate_hz = j.value("keyframe_rate_hz", s.keyframe_rate_hz);
  s.keypoints_per_keyframe = j.value("keypoints_per_keyframe", s.keypoints_per_keyframe);
  s.descriptor_dim = j.value("descriptor_dim", s.descriptor_dim);
  s.seed = j.value("seed", s.seed);
  s.message_latency_s = j.value("message_latency_s", s.message_latency_s);
  if (j.contains("descriptor_source")) {
    const auto& src = j.at("descriptor_source");
    s.source.kind = src.value("kind", s.source.kind);
    s.source.noise_bits = src.value("noise_bits", s.source.noise_bits);
    s.source.checkpoint = src.value("checkpoint", s.source.checkpoint);
  }
  require<ConfigError>(j.contains("robots") && j.at("robots").is_array(),
                       "scenario file needs a 'robots' array");
  for (const auto& r : j.at("robots")) {
    RobotScript rs;
    rs.id = r.at("id").get<int>();
    for (const auto& p : r.at("places")) rs.place_ids.push_back(p.get<std::int64_t>());
    s.robots.push_back(std::move(rs));
  }
  return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
  json j;
  j["keyframe_rate_hz"] = s.keyframe_rate_hz;
  j["keypoints_per_keyframe"] = s.keypoints_per_keyframe;
  j["descriptor_dim"] = s.descriptor_dim;
  j["seed"] = s.seed;
  j["message_latency_s"] = s.message_latency_s;
  j["descriptor_source"] = {{"kind", s.source.kind},
                            {"noise_bits", s.source.noise_bits},
                            {"checkpoint", s.source.checkpoint}};
  j["robots"] = json::array();
  for (const auto& r : s.robots) j["robots"].push_back({{"id", r.id}, {"places", r.place_ids}});
  std::ofstream out(path);
  require<Error>(out.good(), "cannot open scenario file for writing: " + path);
  out << j.dump(2) << "\n";
  require<Error>(out.good(), "scenario write failed: " + path);
}

// ---------------------------------------------------------------------------
// Descriptor channels

namespace {

void validate_scenario(const Scenario& s) {
  require<Error>(!s.robots.empty(), "scenario has no robots");
  require<Error>(s.keyframe_rate_hz > 0, "scenario keyframe rate must be > 0");
  require<Error>(s.keypoints_per_keyframe >= 1, "scenario needs >= 1 keypoint per keyframe");
  require<Error>(s.descriptor_dim >= 8 && s.descriptor_dim % 8 == 0,
                 "scenario descriptor dimension must be a positive multiple of 8");
  std::set<int> ids;
  for (const auto& r : s.robots) {
    require<Error>(ids.insert(r.id).second, "duplicate robot id in scenario");
    require<Error>(!r.place_ids.empty(), "robot " + std::to_string(r.id) + " has no keyframes");
  }
}

DescriptorBinary random_descriptor(Rng& rng, int dim) {
  DescriptorBinary d;
  d.dim = dim;
  d.bits.resize(static_cast<std::size_t>(dim / 8));
  for (auto& byte : d.bits) byte = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  return d;
}

void flip_random_bits(DescriptorBinary& d, int count, Rng& rng) {
  // distinct positions per observation
  std::set<int> positions;
  while (static_cast<int>(positions.size()) < std::min(count, d.dim))
    positions.insert(rng.uniform_int(d.dim));
  for (int k : positions) d.bits[static_cast<std::size_t>(k >> 3)] ^= static_cast<std::uint8_t>(1u << (7 - (k & 7)));
}

}  // namespace

int count_mutual_matches(const std::vector<DescriptorBinary>& a,
                         const std::vector<DescriptorBinary>& b, int hamming_threshold) {
  if (a.empty() || b.empty()) return 0;
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  std::vector<int> nn_a(static_cast<std::size_t>(na), -1), best_a(static_cast<std::size_t>(na));
  std::vector<int> nn_b(static_cast<std::size_t>(nb), -1), best_b(static_cast<std::size_t>(nb));
  for (int i = 0; i < na; ++i) {
    int best = -1, best_d = 0;
    for (int j = 0; j < nb; ++j) {
      const int d = hamming(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
      if (best < 0 || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    nn_a[static_cast<std::size_t>(i)] = best;
    best_a[static_cast<std::size_t>(i)] = best_d;
  }
  for (int j = 0; j < nb; ++j) {
    int best = -1, best_d = 0;
    for (int i = 0; i < na; ++i) {
      const int d = hamming(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
      if (best < 0 || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    nn_b[static_cast<std::size_t>(j)] = best;
    best_b[static_cast<std::size_t>(j)] = best_d;
  }
  int count = 0;
  for (int i = 0; i < na; ++i) {
    const int j = nn_a[static_cast<std::size_t>(i)];
    if (j >= 0 && best_a[static_cast<std::size_t>(i)] <= hamming_threshold && nn_b[static_cast<std::size_t>(j)] == i)
      ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Event loop

SimReport run(const Scenario& scenario, const MatcherConfig& matcher) {
  validate_scenario(scenario);

  struct Emission {
    double time;
    int robot;
    std::uint32_t kf;
    std::int64_t place;
  };
  std::vector<Emission> schedule;
  for (const auto& r : scenario.robots)
    for (std::size_t k = 0; k < r.place_ids.size(); ++k)
      schedule.push_back({static_cast<double>(k) / scenario.keyframe_rate_hz, r.id,
                          static_cast<std::uint32_t>(k), r.place_ids[k]});
  // global logical clock; ties broken by robot id then keyframe id
  std::sort(schedule.begin(), schedule.end(), [](const Emission& x, const Emission& y) {
    if (x.time != y.time) return x.time < y.time;
    if (x.robot != y.robot) return x.robot < y.robot;
    return x.kf < y.kf;
  });

  // descriptor generation
  const bool model_backed = scenario.source.kind == "model";
  Network net;
  if (model_backed) {
    require<ConfigError>(!scenario.source.checkpoint.empty(),
                         "scenario descriptor source 'model' needs a checkpoint path");
    auto loaded = load_checkpoint(scenario.source.checkpoint);
    net = std::move(loaded.net);
    require<ConfigError>(net.output_dim == scenario.descriptor_dim,
                         "scenario descriptor_dim (" + std::to_string(scenario.descriptor_dim) +
                             ") does not match model output dim (" +
                             std::to_string(net.output_dim) + ")");
  } else {
    require<ConfigError>(scenario.source.kind == "synthetic",
                         "unknown descriptor source kind: " + scenario.source.kind);
  }

  auto observe = [&](const Emission& e) -> std::vector<DescriptorBinary> {
    if (!model_backed) {
      std::vector<DescriptorBinary> out;
      out.reserve(static_cast<std::size_t>(scenario.keypoints_per_keyframe));
      for (int k = 0; k < scenario.keypoints_per_keyframe; ++k) {
        Rng base_rng(mix_seed(scenario.seed,
                              mix_seed(static_cast<std::uint64_t>(e.place), static_cast<std::uint64_t>(k))));
        DescriptorBinary d = random_descriptor(base_rng, scenario.descriptor_dim);
        if (scenario.source.noise_bits > 0) {
          Rng obs_rng(mix_seed(mix_seed(scenario.seed, 0xb17f11b),
                               mix_seed(static_cast<std::uint64_t>(e.robot) * 1000003u + e.kf,
                                        static_cast<std::uint64_t>(k))));
          flip_random_bits(d, scenario.source.noise_bits, obs_rng);
        }
        out.push_back(std::move(d));
      }
      return out;
    }
    // model-backed: render one warped view per landmark of this place and
    // describe it with the loaded network
    Tensor<float> inputs({scenario.keypoints_per_keyframe, 1, kInputPatchSize, kInputPatchSize});
    std::vector<std::uint8_t> patch(static_cast<std::size_t>(kStoredPatchSize) * kStoredPatchSize);
    for (int k = 0; k < scenario.keypoints_per_keyframe; ++k) {
      Rng canvas_rng(mix_seed(scenario.seed,
                              mix_seed(static_cast<std::uint64_t>(e.place), static_cast<std::uint64_t>(k))));
      Rng view_rng(mix_seed(mix_seed(scenario.seed, 0xb17f11b),
                            mix_seed(static_cast<std::uint64_t>(e.robot) * 1000003u + e.kf,
                                     static_cast<std::uint64_t>(k))));
      render_synthetic_patch(canvas_rng, view_rng, patch.data());
      patch_to_input(patch.data(), kStoredPatchSize, &inputs.data[inputs.idx4(k, 0, 0, 0)]);
    }
    return binarize_batch(describe(net, inputs));
  };

  struct StoredKeyframe {
    int robot;
    std::uint32_t kf;
    std::int64_t place;
    std::vector<DescriptorBinary> descriptors;
  };
  std::vector<StoredKeyframe> server_store;

  SimReport report;
  double max_time = 0;
  std::size_t total_keyframes = 0;
  for (const auto& e : schedule) {
    const auto descriptors = observe(e);
    // build and encode the wire message to account its exact size
    KeyframeMessage msg;
    msg.robot_id = static_cast<std::uint8_t>(e.robot);
    msg.kf_id = e.kf;
    msg.timestamp = e.time;
    msg.pose = {static_cast<float>(e.place % 97), static_cast<float>(e.kf), 0.0f, 1.0f, 0.0f,
                0.0f, 0.0f};
    msg.keypoints.resize(descriptors.size());
    for (std::size_t k = 0; k < descriptors.size(); ++k) {
      msg.keypoints[k].u = static_cast<float>(k % 64) * 10.0f;
      msg.keypoints[k].v = static_cast<float>(k / 64) * 10.0f;
      msg.keypoints[k].descriptor = descriptors[k];
    }
    const std::size_t bytes = encode_keyframe(msg).size();
    report.timeline.push_back({e.time, e.robot, e.kf, bytes});
    report.total_bytes_sent += bytes;
    report.total_bytes_received += bytes;  // lossless channel
    const double arrival = e.time + scenario.message_latency_s;
    max_time = std::max(max_time, arrival);
    ++total_keyframes;

    // server matches the arrival against all stored keyframes of other robots
    for (const auto& stored : server_store) {
      if (stored.robot == e.robot) continue;
      const int matches = count_mutual_matches(descriptors, stored.descriptors,
                                               matcher.hamming_threshold);
      if (matches >= matcher.min_matches)
        report.loops.push_back({e.robot, e.kf, stored.robot, stored.kf, matches, arrival});
    }
    server_store.push_back({e.robot, e.kf, e.place, descriptors});
  }

  // precision / recall against shared place ids
  std::set<std::tuple<int, std::uint32_t, int, std::uint32_t>> truth;
  for (std::size_t i = 0; i < server_store.size(); ++i)
    for (std::size_t j = i + 1; j < server_store.size(); ++j) {
      const auto& a = server_store[i];
      const auto& b = server_store[j];
      if (a.robot != b.robot && a.place == b.place) {
        truth.insert({std::min(a.robot, b.robot),
                      a.robot < b.robot ? a.kf : b.kf,
                      std::max(a.robot, b.robot),
                      a.robot < b.robot ? b.kf : a.kf});
      }
    }
  std::set<std::tuple<int, std::uint32_t, int, std::uint32_t>> detected;
  int true_positive = 0;
  for (const auto& l : report.loops) {
    auto key = std::make_tuple(std::min(l.robot_a, l.robot_b),
                               l.robot_a < l.robot_b ? l.kf_a : l.kf_b,
                               std::max(l.robot_a, l.robot_b),
                               l.robot_a < l.robot_b ? l.kf_b : l.kf_a);
    if (detected.insert(key).second && truth.count(key)) ++true_positive;
  }
  report.ground_truth_loops = static_cast<int>(truth.size());
  report.precision = detected.empty() ? 1.0 : static_cast<double>(true_positive) / detected.size();
  report.recall = truth.empty() ? 1.0 : static_cast<double>(true_positive) / truth.size();

  // duration covers each robot's full emission window at the configured rate
  std::size_t max_kf_per_robot = 0;
  for (const auto& r : scenario.robots) max_kf_per_robot = std::max(max_kf_per_robot, r.place_ids.size());
  report.duration_s = static_cast<double>(max_kf_per_robot) / scenario.keyframe_rate_hz;
  report.robots = bandwidth_report(report.timeline, scenario.keyframe_rate_hz);
  return report;
}

std::vector<RobotTraffic> bandwidth_report(const std::vector<MessageRecord>& timeline,
                                           double rate_hz) {
  std::map<int, RobotTraffic> by_robot;
  for (const auto& m : timeline) {
    auto& t = by_robot[m.robot_id];
    t.robot_id = m.robot_id;
    t.messages += 1;
    t.bytes_sent += m.bytes;
  }
  std::vector<RobotTraffic> out;
  for (auto& [id, t] : by_robot) {
    // mean rate over the emission window message_count/rate_hz; computed as
    // bytes*rate/count so uniform messages give an exact bytes-per-second
    t.mean_bytes_per_sec =
        static_cast<double>(t.bytes_sent) * rate_hz / static_cast<double>(t.messages);
    t.mean_kbit_per_sec = t.mean_bytes_per_sec * 8.0 / 1000.0;
    t.mean_kbyte_per_sec = t.mean_bytes_per_sec / 1000.0;
    out.push_back(t);
  }
  return out;
}

std::string SimReport::to_json() const {
  json j;
  j["duration_s"] = duration_s;
  j["total_bytes_sent"] = total_bytes_sent;
  j["total_bytes_received"] = total_bytes_received;
  j["precision"] = precision;
  j["recall"] = recall;
  j["ground_truth_loops"] = ground_truth_loops;
  j["loops"] = json::array();
  for (const auto& l : loops)
    j["loops"].push_back({{"robot_a", l.robot_a},
                          {"kf_a", l.kf_a},
                          {"robot_b", l.robot_b},
                          {"kf_b", l.kf_b},
                          {"match_count", l.match_count},
                          {"declared_time", l.declared_time}});
  j["robots"] = json::array();
  for (const auto& r : robots)
    j["robots"].push_back({{"robot_id", r.robot_id},
                           {"messages", r.messages},
                           {"bytes_sent", r.bytes_sent},
                           {"mean_bytes_per_sec", r.mean_bytes_per_sec},
                           {"mean_kbit_per_sec", r.mean_kbit_per_sec},
                           {"mean_kbyte_per_sec", r.mean_kbyte_per_sec}});
  return j.dump(2) + "\n";
}

void SimReport::save_timeline_csv(const std::string& path) const {
  std::ofstream out(path);
  require<Error>(out.good(), "cannot open timeline csv for writing: " + path);
  out << "time_s,robot_id,kf_id,bytes\n";
  out.precision(10);
  for (const auto& m : timeline)
    out << m.time << ',' << m.robot_id << ',' << m.kf_id << ',' << m.bytes << '\n';
  require<Error>(out.good(), "timeline csv write failed: " + path);
}

}  // namespace descdist::sim
