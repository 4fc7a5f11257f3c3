#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "histo/nn/tensor.hpp"
#include "histo/rng.hpp"

namespace histo::nn {

/// Per-channel statistics of a batch-norm input seen during a training forward pass.
struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;
};

/// Activation stack recorded by a training forward pass and replayed, last in
/// first out, by the backward pass.
class Tape {
 public:
  void push(Tensor t) { stack_.push_back(std::move(t)); }
  Tensor pop();
  bool empty() const noexcept { return stack_.empty(); }

  bool record_batch_stats = false;
  std::map<std::string, BatchStats> batch_stats;

 private:
  std::vector<Tensor> stack_;
};

/// Adds `delta` into grads[name], creating the entry on first use.
void accumulate(ParamMap& grads, const std::string& name, const Tensor& delta);

/// A stateless layer: parameters live in a ParamMap under names prefixed by the
/// layer's name, so one layer graph can be shared by any number of weight sets.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const noexcept { return name_; }
  virtual std::string type() const = 0;

  /// Throws ShapeMismatch when the input cannot flow through this layer.
  virtual Shape output_shape(const Shape& in) const = 0;

  /// When `tape` is non-null, pushes whatever backward() needs.
  virtual Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const = 0;

  /// Pops this layer's entries from `tape`, adds parameter gradients into
  /// `grads` and returns the gradient with respect to the input.
  virtual Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                          ParamMap& grads) const = 0;

  virtual void init_params(ParamMap& /*params*/, Rng& /*rng*/) const {}

  /// Parameters updated by the optimizer (excludes running statistics).
  virtual std::vector<std::string> trainable_params() const { return {}; }

  virtual nlohmann::json config() const = 0;

  /// Primitive-layer count for inventories; composites sum their children.
  virtual int layer_count() const { return 1; }

 private:
  std::string name_;
};

using LayerPtr = std::shared_ptr<const Layer>;

/// Rebuilds a layer graph node from config().
LayerPtr layer_from_json(const nlohmann::json& j);

class Conv2d final : public Layer {
 public:
  /// Odd kernels only; "same" symmetric zero padding of kernel/2.
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, bool bias);

  std::string type() const override { return "conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;

  std::string weight_name() const { return name() + ".weight"; }
  std::string bias_name() const { return name() + ".bias"; }

 private:
  int in_, out_, kernel_, stride_;
  bool bias_;
};

class DepthwiseConv2d final : public Layer {
 public:
  DepthwiseConv2d(std::string name, int channels, int kernel, int stride);

  std::string type() const override { return "depthwise_conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;

  std::string weight_name() const { return name() + ".weight"; }

 private:
  int channels_, kernel_, stride_;
};

/// Inference-form batch norm: y = gamma·(x − mean)/sqrt(var + eps) + beta with
/// stored running statistics.
class BatchNorm final : public Layer {
 public:
  static constexpr double kEps = 1e-3;

  BatchNorm(std::string name, int channels);

  std::string type() const override { return "batch_norm"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;

  std::string gamma_name() const { return name() + ".gamma"; }
  std::string beta_name() const { return name() + ".beta"; }
  std::string mean_name() const { return name() + ".running_mean"; }
  std::string var_name() const { return name() + ".running_var"; }

 private:
  int channels_;
};

class Swish final : public Layer {
 public:
  using Layer::Layer;
  std::string type() const override { return "swish"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  nlohmann::json config() const override;
};

class Sigmoid final : public Layer {
 public:
  using Layer::Layer;
  std::string type() const override { return "sigmoid"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  nlohmann::json config() const override;
};

/// (N, C, H, W) -> (N, C).
class GlobalAvgPool final : public Layer {
 public:
  using Layer::Layer;
  std::string type() const override { return "global_avg_pool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  nlohmann::json config() const override;
};

/// Fully connected; inputs of rank > 2 are flattened per sample.
class Dense final : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features);

  std::string type() const override { return "dense"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;

  std::string weight_name() const { return name() + ".weight"; }
  std::string bias_name() const { return name() + ".bias"; }

 private:
  int in_, out_;
};

class Sequential : public Layer {
 public:
  Sequential(std::string name, std::vector<LayerPtr> children);

  std::string type() const override { return "sequential"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;
  int layer_count() const override;

  const std::vector<LayerPtr>& children() const noexcept { return children_; }

 private:
  std::vector<LayerPtr> children_;
};

/// Channel gate: x · sigmoid(expand(swish(reduce(mean_hw(x))))).
class SqueezeExcite final : public Layer {
 public:
  SqueezeExcite(std::string name, int channels, int reduced_channels);

  std::string type() const override { return "squeeze_excite"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;
  int layer_count() const override { return gate_.layer_count() + 1; }

  const Dense& reduce() const;
  const Dense& expand() const;

 private:
  int channels_, reduced_;
  Sequential gate_;
};

/// Inverted-bottleneck sub-block: optional 1×1 expansion, depthwise conv,
/// squeeze-excitation, 1×1 projection, and a residual add for repeat sub-blocks.
class MBConv final : public Layer {
 public:
  struct Options {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    double expand_ratio = 1.0;
    double se_ratio = 0.25;
    int kind = 1;  // SubBlockKind value
  };

  MBConv(std::string name, Options options);

  std::string type() const override { return "mbconv"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ParamMap& params, Tape* tape) const override;
  Tensor backward(const Tensor& grad_out, const ParamMap& params, Tape& tape,
                  ParamMap& grads) const override;
  void init_params(ParamMap& params, Rng& rng) const override;
  std::vector<std::string> trainable_params() const override;
  nlohmann::json config() const override;
  int layer_count() const override;

  bool has_residual() const noexcept { return residual_; }
  const Options& options() const noexcept { return options_; }

 private:
  Options options_;
  bool residual_;
  Sequential body_;
};

/// Row-wise softmax of a (N, K) tensor, computed in double.
Tensor softmax(const Tensor& logits);

/// Mean softmax cross-entropy over the batch; fills `grad_logits` when given.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             Tensor* grad_logits);

}  // namespace histo::nn
