#include "descdist/network.hpp"

#include <sstream>

#include "descdist/hash.hpp"

namespace descdist {

// ---------------------------------------------------------------------------
// ConvLayer

ConvLayer::ConvLayer(int c_in, int c_out, int kernel, int stride, int padding)
    : c_in_(c_in), c_out_(c_out), kernel_(kernel), stride_(stride), padding_(padding) {
  params.weight = TensorF({c_out, c_in, kernel, kernel});
  params.bias = TensorF({c_out});
}

void ConvLayer::init(Rng& rng) { orthogonal_init(params.weight, rng); }

TensorF ConvLayer::forward(const TensorF& x, bool training) {
  if (training) x_cache_ = x;
  return conv2d_forward(x, params, stride_, padding_);
}

TensorF ConvLayer::backward(const TensorF& dy) {
  return conv2d_backward(x_cache_, params, stride_, padding_, dy);
}

void ConvLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &params.weight, true});
  out.push_back({prefix + ".bias", &params.bias, true});
}

LayerInfo ConvLayer::info() const { return {"conv", c_in_, c_out_, kernel_, stride_, padding_}; }

std::string ConvLayer::spec_line() const {
  std::ostringstream os;
  os << "conv in=" << c_in_ << " out=" << c_out_ << " k=" << kernel_ << " s=" << stride_
     << " p=" << padding_;
  return os.str();
}

// ---------------------------------------------------------------------------
// DscLayer

DscLayer::DscLayer(int c_in, int c_out, int kernel, int stride, int padding)
    : c_in_(c_in), c_out_(c_out), kernel_(kernel), stride_(stride), padding_(padding) {
  params.depthwise.weight = TensorF({c_in, 1, kernel, kernel});
  params.depthwise.bias = TensorF({c_in});
  params.pointwise.weight = TensorF({c_out, c_in, 1, 1});
  params.pointwise.bias = TensorF({c_out});
}

void DscLayer::init(Rng& rng) {
  orthogonal_init(params.depthwise.weight, rng);
  orthogonal_init(params.pointwise.weight, rng);
}

TensorF DscLayer::forward(const TensorF& x, bool training) {
  if (training) {
    x_cache_ = x;
    return dsc_forward(x, params, stride_, padding_, &mid_cache_);
  }
  return dsc_forward(x, params, stride_, padding_);
}

TensorF DscLayer::backward(const TensorF& dy) {
  return dsc_backward(x_cache_, mid_cache_, params, stride_, padding_, dy);
}

void DscLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".depthwise.weight", &params.depthwise.weight, true});
  out.push_back({prefix + ".depthwise.bias", &params.depthwise.bias, true});
  out.push_back({prefix + ".pointwise.weight", &params.pointwise.weight, true});
  out.push_back({prefix + ".pointwise.bias", &params.pointwise.bias, true});
}

LayerInfo DscLayer::info() const { return {"dsc", c_in_, c_out_, kernel_, stride_, padding_}; }

std::string DscLayer::spec_line() const {
  std::ostringstream os;
  os << "dsc in=" << c_in_ << " out=" << c_out_ << " k=" << kernel_ << " s=" << stride_
     << " p=" << padding_;
  return os.str();
}

// ---------------------------------------------------------------------------
// FrnLayer

FrnLayer::FrnLayer(int channels, float eps) : channels_(channels) {
  params.gamma = TensorF({channels});
  params.beta = TensorF({channels});
  params.eps = eps;
  std::fill(params.gamma.data.begin(), params.gamma.data.end(), 1.0f);
}

TensorF FrnLayer::forward(const TensorF& x, bool training) {
  if (training) x_cache_ = x;
  return frn_forward(x, params);
}

TensorF FrnLayer::backward(const TensorF& dy) { return frn_backward(x_cache_, params, dy); }

void FrnLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &params.gamma, true});
  out.push_back({prefix + ".beta", &params.beta, true});
}

LayerInfo FrnLayer::info() const {
  LayerInfo li;
  li.kind = "frn";
  li.c_in = li.c_out = channels_;
  return li;
}

std::string FrnLayer::spec_line() const { return "frn c=" + std::to_string(channels_); }

// ---------------------------------------------------------------------------
// TluLayer

TluLayer::TluLayer(int channels) : channels_(channels) { params.tau = TensorF({channels}); }

TensorF TluLayer::forward(const TensorF& x, bool training) {
  if (training) x_cache_ = x;
  return tlu_forward(x, params);
}

TensorF TluLayer::backward(const TensorF& dy) { return tlu_backward(x_cache_, params, dy); }

void TluLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".tau", &params.tau, true});
}

LayerInfo TluLayer::info() const {
  LayerInfo li;
  li.kind = "tlu";
  li.c_in = li.c_out = channels_;
  return li;
}

std::string TluLayer::spec_line() const { return "tlu c=" + std::to_string(channels_); }

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(int channels, float eps, float momentum) : channels_(channels) {
  state.running_mean = TensorF({channels});
  state.running_var = TensorF({channels});
  std::fill(state.running_var.data.begin(), state.running_var.data.end(), 1.0f);
  state.eps = eps;
  state.momentum = momentum;
}

TensorF BatchNormLayer::forward(const TensorF& x, bool training) {
  return batch_norm_forward(x, state, training, training ? &cache_ : nullptr);
}

TensorF BatchNormLayer::backward(const TensorF& dy) { return batch_norm_backward(cache_, dy); }

void BatchNormLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".running_mean", &state.running_mean, false});
  out.push_back({prefix + ".running_var", &state.running_var, false});
}

LayerInfo BatchNormLayer::info() const {
  LayerInfo li;
  li.kind = "batch_norm";
  li.c_in = li.c_out = channels_;
  return li;
}

std::string BatchNormLayer::spec_line() const { return "batch_norm c=" + std::to_string(channels_); }

// ---------------------------------------------------------------------------
// L2NormalizeLayer

TensorF L2NormalizeLayer::forward(const TensorF& x, bool training) {
  require<ShapeError>(x.rank() == 4 && x.dim(2) == 1 && x.dim(3) == 1,
                      "l2_normalize layer expects [N,D,1,1], got " + x.shape_str());
  TensorF flat({x.dim(0), x.dim(1)}, x.data);
  if (training) {
    x_cache_ = flat;
    return l2_normalize_forward(flat, &norms_);
  }
  return l2_normalize_forward(flat);
}

TensorF L2NormalizeLayer::backward(const TensorF& dy) {
  TensorF dx = l2_normalize_backward(x_cache_, norms_, dy);
  return TensorF({dx.dim(0), dx.dim(1), 1, 1}, dx.data);
}

void L2NormalizeLayer::collect_params(const std::string&, std::vector<ParamRef>&) {}

LayerInfo L2NormalizeLayer::info() const {
  LayerInfo li;
  li.kind = "l2_normalize";
  return li;
}

std::string L2NormalizeLayer::spec_line() const { return "l2_normalize"; }

// ---------------------------------------------------------------------------
// Network

TensorF Network::forward(const TensorF& x, bool training) {
  require<ShapeError>(x.rank() == 4 && x.dim(1) == 1 && x.dim(2) == input_size &&
                          x.dim(3) == input_size,
                      "network expects [N,1," + std::to_string(input_size) + "," +
                          std::to_string(input_size) + "], got " + x.shape_str());
  TensorF cur = x;
  for (auto& layer : layers) cur = layer->forward(cur, training);
  return cur;
}

TensorF Network::backward(const TensorF& d_out) {
  require<Error>(!layers.empty(), "backward on empty network");
  TensorF cur = d_out;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

std::vector<ParamRef> Network::params() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i]->collect_params("layer" + std::to_string(i), out);
  return out;
}

std::int64_t Network::param_count() {
  std::int64_t n = 0;
  for (const auto& p : params())
    if (p.trainable) n += p.tensor->numel();
  return n;
}

void Network::zero_grads() {
  for (auto& p : params())
    if (p.trainable) {
      p.tensor->alloc_grad();
      p.tensor->zero_grad();
    }
}

std::vector<LayerInfo> Network::layer_infos() const {
  std::vector<LayerInfo> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l->info());
  return out;
}

std::vector<std::string> Network::spec_lines() const {
  std::vector<std::string> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l->spec_line());
  return out;
}

namespace {

void add_conv_block(Network& net, Rng& rng, int c_in, int c_out, int stride, bool activation) {
  auto conv = std::make_unique<ConvLayer>(c_in, c_out, 3, stride, 1);
  conv->init(rng);
  net.layers.push_back(std::move(conv));
  if (activation) {
    net.layers.push_back(std::make_unique<FrnLayer>(c_out));
    net.layers.push_back(std::make_unique<TluLayer>(c_out));
  }
}

void add_dsc_block(Network& net, Rng& rng, int c_in, int c_out, int stride) {
  auto dsc = std::make_unique<DscLayer>(c_in, c_out, 3, stride, 1);
  dsc->init(rng);
  net.layers.push_back(std::move(dsc));
  net.layers.push_back(std::make_unique<FrnLayer>(c_out));
  net.layers.push_back(std::make_unique<TluLayer>(c_out));
}

void add_head(Network& net, Rng& rng, int c_in, int spatial, int out_dim) {
  auto conv = std::make_unique<ConvLayer>(c_in, out_dim, spatial, 1, 0);
  conv->init(rng);
  net.layers.push_back(std::move(conv));
  net.layers.push_back(std::make_unique<BatchNormLayer>(out_dim));
  net.layers.push_back(std::make_unique<L2NormalizeLayer>());
}

}  // namespace

Network build_teacher(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7eac4e5));
  Network net;
  net.arch = "teacher";
  net.output_dim = 128;
  // 7 conv layers; strides 2 at the 3rd and 5th halve 32 -> 16 -> 8, the
  // final 8x8 conv collapses to a 128-d vector
  add_conv_block(net, rng, 1, 32, 1, true);
  add_conv_block(net, rng, 32, 32, 1, true);
  add_conv_block(net, rng, 32, 64, 2, true);
  add_conv_block(net, rng, 64, 64, 1, true);
  add_conv_block(net, rng, 64, 128, 2, true);
  add_conv_block(net, rng, 128, 128, 1, true);
  add_head(net, rng, 128, 8, 128);
  return net;
}

Network build_student(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x57d0e27));
  Network net;
  net.arch = "student";
  net.output_dim = 64;
  add_conv_block(net, rng, 1, 32, 1, true);
  add_dsc_block(net, rng, 32, 64, 2);
  add_dsc_block(net, rng, 64, 64, 1);
  add_dsc_block(net, rng, 64, 128, 2);
  add_dsc_block(net, rng, 128, 128, 1);
  add_head(net, rng, 128, 8, 64);
  return net;
}

namespace {

int spec_field(const std::string& line, const std::string& key) {
  const std::string pat = key + "=";
  const auto pos = line.find(pat);
  require<CheckpointCorruptError>(pos != std::string::npos,
                                  "network spec line missing field '" + key + "': " + line);
  return std::stoi(line.substr(pos + pat.size()));
}

}  // namespace

Network network_from_spec(const std::string& arch, int input_size, int output_dim,
                          const std::vector<std::string>& lines) {
  Network net;
  net.arch = arch;
  net.input_size = input_size;
  net.output_dim = output_dim;
  for (const auto& line : lines) {
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "conv") {
      net.layers.push_back(std::make_unique<ConvLayer>(spec_field(line, "in"),
                                                       spec_field(line, "out"),
                                                       spec_field(line, "k"), spec_field(line, "s"),
                                                       spec_field(line, "p")));
    } else if (kind == "dsc") {
      net.layers.push_back(std::make_unique<DscLayer>(spec_field(line, "in"),
                                                      spec_field(line, "out"),
                                                      spec_field(line, "k"), spec_field(line, "s"),
                                                      spec_field(line, "p")));
    } else if (kind == "frn") {
      net.layers.push_back(std::make_unique<FrnLayer>(spec_field(line, "c")));
    } else if (kind == "tlu") {
      net.layers.push_back(std::make_unique<TluLayer>(spec_field(line, "c")));
    } else if (kind == "batch_norm") {
      net.layers.push_back(std::make_unique<BatchNormLayer>(spec_field(line, "c")));
    } else if (kind == "l2_normalize") {
      net.layers.push_back(std::make_unique<L2NormalizeLayer>());
    } else {
      throw CheckpointCorruptError("unknown layer kind in network spec: " + line);
    }
  }
  return net;
}

std::uint64_t param_hash(Network& net) {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : net.params()) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.tensor->data.data(), p.tensor->data.size() * sizeof(float), h);
  }
  return h;
}

}  // namespace descdist
