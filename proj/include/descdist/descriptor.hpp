#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descdist/network.hpp"
#include "descdist/patches.hpp"

namespace descdist {

// Packed binary descriptor. Bit = 1 encodes +1, bit = 0 encodes -1,
// MSB-first within each byte; trailing pad bits are zero.
struct DescriptorBinary {
  int dim = 0;
  std::vector<std::uint8_t> bits;  // ceil(dim/8) bytes

  bool bit(int k) const { return (bits[static_cast<std::size_t>(k >> 3)] >> (7 - (k & 7))) & 1; }
};

// Hard sign with sign(0) = -1, then packed.
DescriptorBinary binarize_hard(const float* row, int dim);
std::vector<DescriptorBinary> binarize_batch(const Tensor<float>& descriptors);

std::vector<int> unpack_signs(const DescriptorBinary& b);  // +1/-1 per element

int hamming(const DescriptorBinary& a, const DescriptorBinary& b);

// Inference-mode descriptors for a [N,1,32,32] patch tensor; processed in
// slices so memory stays flat regardless of N.
Tensor<float> describe(Network& net, const Tensor<float>& patches);

// False positive rate at the distance threshold that first reaches 95%
// true-positive recall; ties at the threshold count as detections.
double eval_fpr95(const std::vector<double>& pos_distances,
                  const std::vector<double>& neg_distances);

struct MatchResult {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  bool matched = false;
  double dist_real = 0;
  int dist_hamming = 0;
};

struct BenchmarkResult {
  std::vector<MatchResult> pairs;
  double fpr95_real = 0;
  double fpr95_binary = 0;
};

// Balanced matched/unmatched pair evaluation over a store; distances are L2
// on real descriptors and Hamming on hard-binarized ones.
BenchmarkResult benchmark_pairs(Network& net, const PatchStore& store, int num_pairs,
                                std::uint64_t seed);

struct ProfileResult {
  std::int64_t params = 0;
  double ms_per_500_median = 0;
  std::vector<double> runs_ms;
};

// Wall time of describing `batch` patches, median over `runs` timed passes
// after one warmup.
ProfileResult profile_network(Network& net, int runs = 5, int batch = 500,
                              std::uint64_t seed = 1234);

// Descriptor dump file: little-endian header (magic, version, kind, dim,
// count) + row-major payload (float32 rows or packed bit rows).
void save_descriptors_real(const std::string& path, const Tensor<float>& descriptors);
void save_descriptors_binary(const std::string& path, const std::vector<DescriptorBinary>& descs);
Tensor<float> load_descriptors_real(const std::string& path);
std::vector<DescriptorBinary> load_descriptors_binary(const std::string& path);

}  // namespace descdist
