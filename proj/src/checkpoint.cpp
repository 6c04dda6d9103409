#include "descdist/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace descdist {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts need byte swaps");

namespace {

struct TensorIndexEntry {
  std::string name;
  std::vector<int> shape;
};

std::string shape_to_str(const std::vector<int>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out.empty() ? "scalar" : out;
}

}  // namespace

void save_checkpoint(Network& net, const CheckpointMeta& meta, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require<CheckpointError>(out.good(), "cannot open checkpoint for writing: " + path);
  out << "DDCKPT " << kCheckpointVersion << "\n";
  out << "arch " << net.arch << "\n";
  out << "input_size " << net.input_size << "\n";
  out << "output_dim " << net.output_dim << "\n";
  for (const auto& line : net.spec_lines()) out << "layer " << line << "\n";
  for (const auto& [k, v] : meta.fields) out << "meta " << k << " " << v << "\n";
  const auto params = net.params();
  for (const auto& p : params)
    out << "tensor " << p.name << " " << shape_to_str(p.tensor->shape) << "\n";
  out << "blob\n";
  for (const auto& p : params) {
    const auto& d = p.tensor->data;
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(float)));
  }
  require<CheckpointError>(out.good(), "checkpoint write failed: " + path);
}

namespace {

struct ParsedHeader {
  std::string arch;
  int input_size = 0;
  int output_dim = 0;
  std::vector<std::string> layer_lines;
  CheckpointMeta meta;
  std::vector<TensorIndexEntry> index;
  std::streampos blob_start;
};

std::vector<int> parse_shape(const std::string& s) {
  if (s == "scalar") return {};
  std::vector<int> shape;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, 'x')) {
    require<CheckpointCorruptError>(!tok.empty(), "bad shape token in checkpoint index");
    shape.push_back(std::stoi(tok));
  }
  return shape;
}

ParsedHeader parse_header(std::ifstream& in, const std::string& path) {
  ParsedHeader h;
  std::string line;
  require<CheckpointCorruptError>(static_cast<bool>(std::getline(in, line)),
                                  "checkpoint is empty: " + path);
  std::istringstream magic(line);
  std::string tag;
  int version = -1;
  magic >> tag >> version;
  require<CheckpointCorruptError>(tag == "DDCKPT", "not a checkpoint file (bad magic): " + path);
  require<CheckpointVersionError>(version == kCheckpointVersion,
                                  "unsupported checkpoint version " + std::to_string(version) +
                                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  bool saw_blob = false;
  while (std::getline(in, line)) {
    if (line == "blob") {
      saw_blob = true;
      break;
    }
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "arch") {
      is >> h.arch;
    } else if (key == "input_size") {
      is >> h.input_size;
    } else if (key == "output_dim") {
      is >> h.output_dim;
    } else if (key == "layer") {
      h.layer_lines.push_back(line.substr(6));
    } else if (key == "meta") {
      std::string name;
      is >> name;
      std::string value;
      std::getline(is, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      h.meta.fields[name] = value;
    } else if (key == "tensor") {
      TensorIndexEntry e;
      std::string shape;
      is >> e.name >> shape;
      require<CheckpointCorruptError>(!e.name.empty() && !shape.empty(),
                                      "malformed tensor index line: " + line);
      e.shape = parse_shape(shape);
      h.index.push_back(std::move(e));
    } else {
      throw CheckpointCorruptError("unrecognized checkpoint header line: " + line);
    }
  }
  require<CheckpointCorruptError>(saw_blob, "checkpoint header is truncated (no blob marker)");
  h.blob_start = in.tellg();
  return h;
}

void read_blob_into(Network& net, const ParsedHeader& h, std::ifstream& in,
                    const std::string& path) {
  auto params = net.params();
  require<CheckpointShapeError>(params.size() == h.index.size(),
                                "checkpoint lists " + std::to_string(h.index.size()) +
                                    " tensors but the network has " +
                                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require<CheckpointShapeError>(params[i].name == h.index[i].name,
                                  "checkpoint tensor '" + h.index[i].name +
                                      "' does not match network tensor '" + params[i].name + "'");
    require<CheckpointShapeError>(params[i].tensor->shape == h.index[i].shape,
                                  "shape mismatch for tensor '" + params[i].name + "': file has " +
                                      shape_to_str(h.index[i].shape) + ", network has " +
                                      shape_to_str(params[i].tensor->shape));
    auto& d = params[i].tensor->data;
    in.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(float)));
    require<CheckpointCorruptError>(in.gcount() ==
                                        static_cast<std::streamsize>(d.size() * sizeof(float)),
                                    "checkpoint blob is truncated: " + path);
  }
  // trailing bytes mean the file does not belong to this header
  char extra;
  in.read(&extra, 1);
  require<CheckpointCorruptError>(in.eof(), "checkpoint has trailing bytes: " + path);
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<CheckpointError>(in.good(), "cannot open checkpoint: " + path);
  const ParsedHeader h = parse_header(in, path);
  LoadedCheckpoint lc;
  lc.net = network_from_spec(h.arch, h.input_size, h.output_dim, h.layer_lines);
  lc.meta = h.meta;
  read_blob_into(lc.net, h, in, path);
  return lc;
}

CheckpointMeta load_checkpoint_into(Network& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<CheckpointError>(in.good(), "cannot open checkpoint: " + path);
  const ParsedHeader h = parse_header(in, path);
  read_blob_into(net, h, in, path);
  return h.meta;
}

}  // namespace descdist
