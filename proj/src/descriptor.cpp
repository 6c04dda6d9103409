#include "descdist/descriptor.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace descdist {

DescriptorBinary binarize_hard(const float* row, int dim) {
  DescriptorBinary b;
  b.dim = dim;
  b.bits.assign(static_cast<std::size_t>((dim + 7) / 8), 0);
  for (int k = 0; k < dim; ++k)
    if (row[k] > 0.0f) b.bits[static_cast<std::size_t>(k >> 3)] |= static_cast<std::uint8_t>(1u << (7 - (k & 7)));
  return b;
}

std::vector<DescriptorBinary> binarize_batch(const Tensor<float>& descriptors) {
  require<ShapeError>(descriptors.rank() == 2, "binarize_batch: input must be [N,D]");
  const int n = descriptors.dim(0), d = descriptors.dim(1);
  std::vector<DescriptorBinary> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(binarize_hard(&descriptors.data[descriptors.idx2(i, 0)], d));
  return out;
}

std::vector<int> unpack_signs(const DescriptorBinary& b) {
  std::vector<int> s(static_cast<std::size_t>(b.dim));
  for (int k = 0; k < b.dim; ++k) s[static_cast<std::size_t>(k)] = b.bit(k) ? 1 : -1;
  return s;
}

int hamming(const DescriptorBinary& a, const DescriptorBinary& b) {
  require<ShapeError>(a.dim == b.dim, "hamming: dimension mismatch (" + std::to_string(a.dim) +
                                          " vs " + std::to_string(b.dim) + ")");
  int dist = 0;
  std::size_t i = 0;
  // pad bits are zero in both operands, so whole-word XOR is safe
  for (; i + 8 <= a.bits.size(); i += 8) {
    std::uint64_t wa, wb;
    std::memcpy(&wa, &a.bits[i], 8);
    std::memcpy(&wb, &b.bits[i], 8);
    dist += std::popcount(wa ^ wb);
  }
  for (; i < a.bits.size(); ++i)
    dist += std::popcount(static_cast<unsigned>(a.bits[i] ^ b.bits[i]));
  return dist;
}

Tensor<float> describe(Network& net, const Tensor<float>& patches) {
  require<ShapeError>(patches.rank() == 4, "describe: patches must be [N,1,32,32]");
  const int n = patches.dim(0);
  Tensor<float> out({n, net.output_dim});
  constexpr int kChunk = 256;
  for (int begin = 0; begin < n; begin += kChunk) {
    const int end = std::min(n, begin + kChunk);
    const Tensor<float> part = net.forward(slice_batch(patches, begin, end), /*training=*/false);
    std::copy(part.data.begin(), part.data.end(), out.data.begin() + out.idx2(begin, 0));
  }
  return out;
}

double eval_fpr95(const std::vector<double>& pos_distances,
                  const std::vector<double>& neg_distances) {
  require<Error>(!pos_distances.empty() && !neg_distances.empty(),
                 "eval_fpr95: distance lists must be non-empty");
  require<Error>(pos_distances.size() >= 20,
                 "eval_fpr95: need >= 20 positive pairs for a meaningful 95% recall threshold, got " +
                     std::to_string(pos_distances.size()));
  std::vector<double> pos = pos_distances;
  std::sort(pos.begin(), pos.end());
  // smallest threshold with recall >= 0.95 under the "<= threshold" rule
  const std::size_t need =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(pos.size()) - 1e-12));
  const double threshold = pos[need - 1];
  std::size_t below = 0;
  for (double d : neg_distances)
    if (d <= threshold) ++below;
  return static_cast<double>(below) / static_cast<double>(neg_distances.size());
}

BenchmarkResult benchmark_pairs(Network& net, const PatchStore& store, int num_pairs,
                                std::uint64_t seed) {
  require<Error>(num_pairs >= 40, "benchmark_pairs: need at least 40 pairs");
  std::map<std::int64_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < store.count(); ++i) by_id[store.point_ids[i]].push_back(i);
  std::vector<std::int64_t> pairable, all_ids;
  for (const auto& [id, idxs] : by_id) {
    all_ids.push_back(id);
    if (idxs.size() >= 2) pairable.push_back(id);
  }
  require<Error>(!pairable.empty() && all_ids.size() >= 2,
                 "benchmark_pairs: store cannot form matched and unmatched pairs");

  Rng rng(seed);
  const int half = num_pairs / 2;
  std::vector<std::pair<std::size_t, std::size_t>> index_pairs;
  std::vector<bool> labels;
  for (int i = 0; i < half; ++i) {
    const auto& idxs = by_id.at(pairable[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pairable.size())))]);
    const int a = rng.uniform_int(static_cast<int>(idxs.size()));
    int b = rng.uniform_int(static_cast<int>(idxs.size()) - 1);
    if (b >= a) ++b;
    index_pairs.emplace_back(idxs[static_cast<std::size_t>(a)], idxs[static_cast<std::size_t>(b)]);
    labels.push_back(true);
  }
  for (int i = 0; i < num_pairs - half; ++i) {
    const int ia = rng.uniform_int(static_cast<int>(all_ids.size()));
    int ib = rng.uniform_int(static_cast<int>(all_ids.size()) - 1);
    if (ib >= ia) ++ib;
    const auto& ca = by_id.at(all_ids[static_cast<std::size_t>(ia)]);
    const auto& cb = by_id.at(all_ids[static_cast<std::size_t>(ib)]);
    index_pairs.emplace_back(ca[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(ca.size())))],
                             cb[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(cb.size())))]);
    labels.push_back(false);
  }

  // describe each distinct patch once
  std::vector<std::size_t> unique_idx;
  std::map<std::size_t, std::size_t> row_of;
  for (const auto& [a, b] : index_pairs)
    for (std::size_t idx : {a, b})
      if (row_of.emplace(idx, unique_idx.size()).second) unique_idx.push_back(idx);
  const Tensor<float> inputs = store_to_inputs(store, unique_idx);
  const Tensor<float> real = describe(net, inputs);
  const auto binary = binarize_batch(real);

  BenchmarkResult result;
  std::vector<double> pos_real, neg_real, pos_ham, neg_ham;
  const int d = real.dim(1);
  for (std::size_t i = 0; i < index_pairs.size(); ++i) {
    const std::size_t ra = row_of.at(index_pairs[i].first);
    const std::size_t rb = row_of.at(index_pairs[i].second);
    double ssq = 0;
    for (int k = 0; k < d; ++k) {
      const double diff = real.at2(static_cast<int>(ra), k) - real.at2(static_cast<int>(rb), k);
      ssq += diff * diff;
    }
    MatchResult mr;
    mr.index_a = index_pairs[i].first;
    mr.index_b = index_pairs[i].second;
    mr.matched = labels[i];
    mr.dist_real = std::sqrt(ssq);
    mr.dist_hamming = hamming(binary[ra], binary[rb]);
    result.pairs.push_back(mr);
    (mr.matched ? pos_real : neg_real).push_back(mr.dist_real);
    (mr.matched ? pos_ham : neg_ham).push_back(static_cast<double>(mr.dist_hamming));
  }
  result.fpr95_real = eval_fpr95(pos_real, neg_real);
  result.fpr95_binary = eval_fpr95(pos_ham, neg_ham);
  return result;
}

ProfileResult profile_network(Network& net, int runs, int batch, std::uint64_t seed) {
  require<Error>(runs >= 1 && batch >= 1, "profile_network: bad arguments");
  Rng rng(seed);
  Tensor<float> patches({batch, 1, kInputPatchSize, kInputPatchSize});
  patches.fill_normal(rng);
  ProfileResult result;
  result.params = net.param_count();
  describe(net, patches);  // warmup
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    describe(net, patches);
    const auto t1 = std::chrono::steady_clock::now();
    result.runs_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = result.runs_ms;
  std::sort(sorted.begin(), sorted.end());
  result.ms_per_500_median = sorted[sorted.size() / 2];
  return result;
}

// ---------------------------------------------------------------------------
// Descriptor dump file

namespace {

constexpr char kDescMagic[8] = {'D', 'D', 'E', 'S', 'C', '0', '0', '1'};

void write_desc_header(std::ofstream& out, std::uint8_t kind, std::uint32_t dim,
                       std::uint32_t count) {
  out.write(kDescMagic, 8);
  out.put(static_cast<char>(kind));  // 0 = real float32, 1 = packed binary
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
}

struct DescHeader {
  std::uint8_t kind;
  std::uint32_t dim;
  std::uint32_t count;
};

DescHeader read_desc_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  require<CodecError>(in.gcount() == 8 && std::memcmp(magic, kDescMagic, 8) == 0,
                      "not a descriptor dump (bad magic): " + path);
  DescHeader h{};
  in.read(reinterpret_cast<char*>(&h.kind), 1);
  in.read(reinterpret_cast<char*>(&h.dim), 4);
  in.read(reinterpret_cast<char*>(&h.count), 4);
  require<CodecError>(in.good(), "descriptor dump header truncated: " + path);
  require<CodecError>(h.kind <= 1, "descriptor dump has unknown kind: " + path);
  return h;
}

}  // namespace

void save_descriptors_real(const std::string& path, const Tensor<float>& descriptors) {
  require<ShapeError>(descriptors.rank() == 2, "save_descriptors_real: input must be [N,D]");
  std::ofstream out(path, std::ios::binary);
  require<Error>(out.good(), "cannot open descriptor dump for writing: " + path);
  write_desc_header(out, 0, static_cast<std::uint32_t>(descriptors.dim(1)),
                    static_cast<std::uint32_t>(descriptors.dim(0)));
  out.write(reinterpret_cast<const char*>(descriptors.data.data()),
            static_cast<std::streamsize>(descriptors.data.size() * sizeof(float)));
  require<Error>(out.good(), "descriptor dump write failed: " + path);
}

void save_descriptors_binary(const std::string& path, const std::vector<DescriptorBinary>& descs) {
  require<Error>(!descs.empty(), "save_descriptors_binary: empty list");
  std::ofstream out(path, std::ios::binary);
  require<Error>(out.good(), "cannot open descriptor dump for writing: " + path);
  write_desc_header(out, 1, static_cast<std::uint32_t>(descs.front().dim),
                    static_cast<std::uint32_t>(descs.size()));
  for (const auto& d : descs) {
    require<Error>(d.dim == descs.front().dim, "save_descriptors_binary: mixed dimensions");
    out.write(reinterpret_cast<const char*>(d.bits.data()),
              static_cast<std::streamsize>(d.bits.size()));
  }
  require<Error>(out.good(), "descriptor dump write failed: " + path);
}

Tensor<float> load_descriptors_real(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<CodecError>(in.good(), "cannot open descriptor dump: " + path);
  const DescHeader h = read_desc_header(in, path);
  require<CodecError>(h.kind == 0, "descriptor dump holds binary rows, expected real: " + path);
  Tensor<float> out({static_cast<int>(h.count), static_cast<int>(h.dim)});
  in.read(reinterpret_cast<char*>(out.data.data()),
          static_cast<std::streamsize>(out.data.size() * sizeof(float)));
  require<CodecError>(in.gcount() == static_cast<std::streamsize>(out.data.size() * sizeof(float)),
                      "descriptor dump truncated: " + path);
  return out;
}

std::vector<DescriptorBinary> load_descriptors_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<CodecError>(in.good(), "cannot open descriptor dump: " + path);
  const DescHeader h = read_desc_header(in, path);
  require<CodecError>(h.kind == 1, "descriptor dump holds real rows, expected binary: " + path);
  const std::size_t row = (h.dim + 7) / 8;
  std::vector<DescriptorBinary> out(h.count);
  for (auto& d : out) {
    d.dim = static_cast<int>(h.dim);
    d.bits.resize(row);
    in.read(reinterpret_cast<char*>(d.bits.data()), static_cast<std::streamsize>(row));
    require<CodecError>(in.gcount() == static_cast<std::streamsize>(row),
                        "descriptor dump truncated: " + path);
  }
  return out;
}

}  // namespace descdist
