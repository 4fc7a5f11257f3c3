#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histo/image.hpp"
#include "histo/nn/layers.hpp"
#include "histo/scaling.hpp"

namespace histo::nn {

/// Layer graph plus its weights. The graph is immutable and shared between
/// copies; a copy owns its own weights. All const members are safe to call
/// concurrently.
class Model {
 public:
  Model() = default;

  /// Validates that a (1, 3, R, R) input flows to (1, num_classes).
  Model(std::vector<LayerPtr> layers, ParamMap params, int num_classes, int input_resolution,
        nlohmann::json info = nlohmann::json::object());

  int num_classes() const noexcept { return num_classes_; }
  int input_resolution() const noexcept { return input_resolution_; }
  bool empty() const noexcept { return layers_.empty(); }

  const std::vector<LayerPtr>& layers() const noexcept { return layers_; }
  const ParamMap& params() const noexcept { return params_; }
  ParamMap& params() noexcept { return params_; }

  /// Free-form descriptor stored with the weights (e.g. variant, phi).
  const nlohmann::json& info() const noexcept { return info_; }

  Tensor logits(const Tensor& batch, Tape* tape = nullptr) const;

  /// Softmax probabilities, one row per sample.
  Tensor predict_probs(const Tensor& batch) const;

  /// Back-propagates d(loss)/d(logits) through the graph recorded on `tape`.
  void backward(const Tensor& grad_logits, Tape& tape, ParamMap& grads) const;

  std::vector<std::string> trainable_params() const;
  std::size_t parameter_count() const;
  int layer_count() const;

  /// Graph description sufficient to rebuild the model from weights.
  nlohmann::json graph() const;
  static Model from_graph(const nlohmann::json& graph, ParamMap params);

 private:
  void check_input(const Tensor& batch) const;

  std::vector<LayerPtr> layers_;
  ParamMap params_;
  int num_classes_ = 0;
  int input_resolution_ = 0;
  nlohmann::json info_ = nlohmann::json::object();
};

/// Initializes every layer's parameters from one seeded stream, in graph order.
Model make_model(std::vector<LayerPtr> layers, int num_classes, int input_resolution,
                 std::uint64_t init_seed, nlohmann::json info = nlohmann::json::object());

/// Stem conv, the seven blocks expanded into sub-blocks per the plan, head
/// conv, pooling and a dense classifier.
Model build_model(const ArchSpec& spec, int num_classes, std::uint64_t init_seed);

/// Small classifier from the same layer library, sized for desk-scale
/// training: stem conv, one MBConv sub-block of kind 1, pooling, dense.
Model build_compact_model(int input_resolution, int width, int num_classes,
                          std::uint64_t init_seed);

/// Pixels scaled to [0, 1], NCHW. All images must share one size.
Tensor images_to_tensor(std::span<const Image> images);

}  // namespace histo::nn
