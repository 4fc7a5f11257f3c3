#include "histo/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "histo/error.hpp"

namespace histo::nn {

void TrainerConfig::validate() const {
  if (!(lr0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lr0 must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma in (0, 1]");
  if (step_size < 1) throw Error(ErrorCode::InvalidArgument, "step_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "momentum in [0, 1)");
  }
  if (epochs < 0 || batch_size < 1) throw Error(ErrorCode::InvalidArgument, "epochs/batch_size");
}

double step_lr(int epoch, const TrainerConfig& cfg) {
  if (epoch < 0) throw Error(ErrorCode::InvalidArgument, "epoch must be >= 0");
  return cfg.lr0 * std::pow(cfg.gamma, epoch / cfg.step_size);
}

namespace {

int argmax_row(const Tensor& t, int row) {
  const int k = t.dim(1);
  const float* r = t.data() + static_cast<std::size_t>(row) * k;
  return static_cast<int>(std::max_element(r, r + k) - r);
}

}  // namespace

Evaluation evaluate(const Model& model, std::span<const LabeledBatch> batches) {
  Evaluation ev;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& batch : batches) {
    const Tensor logits = model.logits(batch.inputs);
    loss_sum += softmax_cross_entropy(logits, batch.labels, nullptr) * batch.labels.size();
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      if (argmax_row(logits, static_cast<int>(i)) == batch.labels[i]) ++correct;
    }
    ev.samples += batch.labels.size();
  }
  if (ev.samples) {
    ev.loss = loss_sum / ev.samples;
    ev.accuracy = static_cast<double>(correct) / ev.samples;
  }
  return ev;
}

Trainer::Trainer(Model& model, TrainerConfig cfg) : model_(model), cfg_(cfg) {
  cfg_.validate();
  trainable_ = model_.trainable_params();
  for (const auto& name : trainable_) {
    velocity_[name] = Tensor(model_.params().at(name).shape());
  }
}

double Trainer::step(const LabeledBatch& batch, double lr) {
  std::size_t correct = 0;
  return step(batch, lr, correct);
}

double Trainer::step(const LabeledBatch& batch, double lr, std::size_t& correct) {
  Tape tape;
  tape.record_batch_stats = cfg_.update_bn_stats;
  const Tensor logits = model_.logits(batch.inputs, &tape);
  Tensor grad;
  const double loss = softmax_cross_entropy(logits, batch.labels, &grad);
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (argmax_row(logits, static_cast<int>(i)) == batch.labels[i]) ++correct;
  }
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "loss " + std::to_string(loss) + " at lr " +
                                              std::to_string(lr));
  }
  ParamMap grads;
  model_.backward(grad, tape, grads);

  for (const auto& name : trainable_) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Tensor& v = velocity_.at(name);
    Tensor& w = model_.params().at(name);
    const Tensor& g = git->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = static_cast<float>(cfg_.momentum * v[i] + g[i]);
      if (lr != 0.0) w[i] = static_cast<float>(w[i] - lr * v[i]);
    }
  }
  if (cfg_.update_bn_stats) {
    const double m = cfg_.bn_momentum;
    for (const auto& [layer, stats] : tape.batch_stats) {
      Tensor& mean = model_.params().at(layer + ".running_mean");
      Tensor& var = model_.params().at(layer + ".running_var");
      for (std::size_t c = 0; c < stats.mean.size(); ++c) {
        mean[c] = static_cast<float>(m * mean[c] + (1.0 - m) * stats.mean[c]);
        var[c] = static_cast<float>(m * var[c] + (1.0 - m) * stats.var[c]);
      }
    }
  }
  return loss;
}

History Trainer::fit(std::span<const LabeledBatch> train, std::span<const LabeledBatch> valid) {
  History history;
  Rng rng(cfg_.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = step_lr(epoch, cfg_);
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    for (std::size_t idx : order) {
      const auto& batch = train[idx];
      loss_sum += step(batch, stats.lr, correct) * batch.labels.size();
      seen += batch.labels.size();
    }
    if (seen) {
      stats.train_loss = loss_sum / seen;
      stats.train_accuracy = static_cast<double>(correct) / seen;
    }
    if (!valid.empty()) {
      const Evaluation ev = evaluate(model_, valid);
      stats.valid_loss = ev.loss;
      stats.valid_accuracy = ev.accuracy;
    }
    history.push_back(stats);
  }
  return history;
}

History fit(Model& model, std::span<const LabeledBatch> train, std::span<const LabeledBatch> valid,
            const TrainerConfig& cfg) {
  Trainer trainer(model, cfg);
  return trainer.fit(train, valid);
}

std::vector<LabeledBatch> make_batches(std::span<const Tensor> samples, std::span<const int> labels,
                                       int batch_size) {
  if (samples.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "samples and labels differ in length");
  }
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  std::vector<LabeledBatch> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    const Shape& one = samples[start].shape();  // (1, C, H, W) or (C, H, W)
    const std::size_t per = samples[start].size();
    Shape shape = one.size() == 4 ? Shape{static_cast<int>(end - start), one[1], one[2], one[3]}
                                  : Shape{static_cast<int>(end - start), one[0], one[1], one[2]};
    Tensor batch(shape);
    LabeledBatch lb;
    for (std::size_t i = start; i < end; ++i) {
      if (samples[i].size() != per) throw Error(ErrorCode::ShapeMismatch, "ragged samples");
      std::copy_n(samples[i].data(), per, batch.data() + (i - start) * per);
      lb.labels.push_back(labels[i]);
    }
    lb.inputs = std::move(batch);
    out.push_back(std::move(lb));
  }
  return out;
}

}  // namespace histo::nn
