#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histo/nn/model.hpp"

namespace histo::nn {

struct TrainerConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  int step_size = 30;
  double gamma = 0.5;
  int epochs = 1;
  int batch_size = 32;
  /// Running batch-norm statistics follow an EMA of batch statistics.
  bool update_bn_stats = true;
  double bn_momentum = 0.99;
  /// Seeds the per-epoch batch order.
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

/// lr0 · gamma^floor(epoch / step_size)
double step_lr(int epoch, const TrainerConfig& cfg);

struct LabeledBatch {
  Tensor inputs;
  std::vector<int> labels;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

using History = std::vector<EpochStats>;

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

Evaluation evaluate(const Model& model, std::span<const LabeledBatch> batches);

/// SGD with momentum (v ← μ·v + g, w ← w − lr·v) on mean softmax cross-entropy.
/// Owns its model exclusively while training.
class Trainer {
 public:
  Trainer(Model& model, TrainerConfig cfg);

  /// One optimizer step; returns the batch loss before the update.
  double step(const LabeledBatch& batch, double lr);

  /// As above, also counting pre-update correct predictions into `correct`.
  double step(const LabeledBatch& batch, double lr, std::size_t& correct);

  History fit(std::span<const LabeledBatch> train, std::span<const LabeledBatch> valid);

 private:
  Model& model_;
  TrainerConfig cfg_;
  ParamMap velocity_;
  std::vector<std::string> trainable_;
};

History fit(Model& model, std::span<const LabeledBatch> train, std::span<const LabeledBatch> valid,
            const TrainerConfig& cfg);

/// Groups samples (already shuffled by the caller if desired) into batches.
std::vector<LabeledBatch> make_batches(std::span<const Tensor> samples, std::span<const int> labels,
                                       int batch_size);

}  // namespace histo::nn
