#include "histo/pipeline.hpp"

#include <numeric>

#include "histo/aggregate.hpp"
#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/resample.hpp"
#include "histo/rng.hpp"

namespace histo {

namespace {

nn::Tensor to_sample(const Image& patch, int resolution) {
  const Image sized = resize_bilinear(patch, resolution, resolution);
  return nn::images_to_tensor(std::span<const Image>(&sized, 1));
}

}  // namespace

PatchDataset build_patch_dataset(const Manifest& manifest, const TileSpec& spec, int resolution,
                                 const PatchAugment& augment) {
  if (augment.copies < 0) throw Error(ErrorCode::InvalidArgument, "augment copies must be >= 0");
  if (augment.copies > 0) augment.params.validate();
  PatchDataset out;
  Rng seeds(augment.seed);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    const Image image = read_png(entry.path);
    for (const auto& lp : labeled_patches(image, entry.label, spec)) {
      out.samples.push_back(to_sample(lp.patch.pixels, resolution));
      out.labels.push_back(index_of(lp.label));
      out.image_index.push_back(i);
      for (int k = 0; k < augment.copies; ++k) {
        const Image aug = random_augment(lp.patch.pixels, augment.params, seeds.next_u64());
        out.samples.push_back(to_sample(aug, resolution));
        out.labels.push_back(index_of(lp.label));
        out.image_index.push_back(i);
      }
    }
  }
  return out;
}

nn::History train_on_patches(nn::Model& model, const Manifest& train, const Manifest& valid,
                             const PatchTrainingConfig& cfg) {
  cfg.trainer.validate();
  const int res = model.input_resolution();
  PatchDataset tr = build_patch_dataset(train, cfg.tile, res, cfg.augment);
  if (tr.samples.empty()) throw Error(ErrorCode::EmptyInput, "no training patches");

  std::vector<std::size_t> order(tr.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.batch_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<nn::Tensor> samples;
  std::vector<int> labels;
  samples.reserve(order.size());
  labels.reserve(order.size());
  for (std::size_t idx : order) {
    samples.push_back(std::move(tr.samples[idx]));
    labels.push_back(tr.labels[idx]);
  }
  const auto train_batches = nn::make_batches(samples, labels, cfg.trainer.batch_size);

  std::vector<nn::LabeledBatch> valid_batches;
  if (!valid.entries.empty()) {
    const PatchDataset va = build_patch_dataset(valid, cfg.tile, res);
    valid_batches = nn::make_batches(va.samples, va.labels, cfg.trainer.batch_size);
  }
  return nn::fit(model, train_batches, valid_batches, cfg.trainer);
}

ImageLevelReport evaluate_images(const nn::Model& model, const Manifest& manifest,
                                 const TileSpec& spec) {
  ImageLevelReport report;
  for (const auto& entry : manifest.entries) {
    const ImageClassification result = classify_image(model, read_png(entry.path), spec);
    report.truth.push_back(entry.label);
    report.predicted.push_back(result.label);
    report.image_matrix.add(entry.label, result.label);
    for (ClassLabel p : result.patch_labels) report.patch_matrix.add(entry.label, p);
  }
  report.image_accuracy = accuracy(report.image_matrix);
  report.patch_accuracy = accuracy(report.patch_matrix);
  return report;
}

}  // namespace histo
