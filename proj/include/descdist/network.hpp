#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "descdist/layers.hpp"
#include "descdist/tensor.hpp"

namespace descdist {

using TensorF = Tensor<float>;

// Reference to a tensor owned by a layer. Buffers (BN running stats) travel
// through checkpoints but are not trainable and not counted as parameters.
struct ParamRef {
  std::string name;
  TensorF* tensor;
  bool trainable;
};

struct LayerInfo {
  std::string kind;  // conv | dsc | frn | tlu | batch_norm | l2_normalize
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual TensorF forward(const TensorF& x, bool training) = 0;
  // Consumes the activation gradient, accumulates parameter gradients,
  // returns the input gradient. Requires a preceding forward call.
  virtual TensorF backward(const TensorF& dy) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) = 0;
  virtual LayerInfo info() const = 0;
  // One-line serialized form for checkpoint headers.
  virtual std::string spec_line() const = 0;
};

class ConvLayer final : public Layer {
 public:
  ConvLayer(int c_in, int c_out, int kernel, int stride, int padding);
  void init(Rng& rng);
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

  ConvParams<float> params;

 private:
  int c_in_, c_out_, kernel_, stride_, padding_;
  TensorF x_cache_;
};

class DscLayer final : public Layer {
 public:
  DscLayer(int c_in, int c_out, int kernel, int stride, int padding);
  void init(Rng& rng);
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

  DscParams<float> params;

 private:
  int c_in_, c_out_, kernel_, stride_, padding_;
  TensorF x_cache_, mid_cache_;
};

class FrnLayer final : public Layer {
 public:
  explicit FrnLayer(int channels, float eps = 1e-6f);
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

  FrnParams<float> params;

 private:
  int channels_;
  TensorF x_cache_;
};

class TluLayer final : public Layer {
 public:
  explicit TluLayer(int channels);
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

  TluParams<float> params;

 private:
  int channels_;
  TensorF x_cache_;
};

class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(int channels, float eps = 1e-5f, float momentum = 0.1f);
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

  BatchNormState<float> state;

 private:
  int channels_;
  BatchNormCache<float> cache_;
};

// Flattens [N,C,1,1] to [N,C] and L2-normalizes rows.
class L2NormalizeLayer final : public Layer {
 public:
  TensorF forward(const TensorF& x, bool training) override;
  TensorF backward(const TensorF& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  LayerInfo info() const override;
  std::string spec_line() const override;

 private:
  TensorF x_cache_;
  std::vector<float> norms_;
};

// A sequential descriptor network mapping [N,1,input_size,input_size]
// patches to unit-norm [N,output_dim] rows.
class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  std::string arch;  // "teacher" | "student"
  int input_size = 32;
  int output_dim = 0;
  std::vector<std::unique_ptr<Layer>> layers;

  TensorF forward(const TensorF& x, bool training);
  // Backward through the whole stack; call after a training-mode forward.
  TensorF backward(const TensorF& d_out);

  std::vector<ParamRef> params();
  std::int64_t param_count();  // trainable parameters only
  void zero_grads();
  std::vector<LayerInfo> layer_infos() const;
  std::vector<std::string> spec_lines() const;
};

// HyNet-style 7-layer 128-d teacher over 32x32 single-channel patches.
Network build_teacher(std::uint64_t seed);

// 6-layer 64-d student: standard conv first and last, four depthwise
// separable blocks in between.
Network build_student(std::uint64_t seed);

// Rebuild an uninitialized network (zero weights) from spec_lines() output.
Network network_from_spec(const std::string& arch, int input_size, int output_dim,
                          const std::vector<std::string>& lines);

// FNV-1a over all parameter and buffer bytes, in declaration order.
std::uint64_t param_hash(Network& net);

}  // namespace descdist
