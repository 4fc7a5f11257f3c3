#pragma once

#include <cstdint>
#include <vector>

#include "histo/augment.hpp"
#include "histo/dataset.hpp"
#include "histo/metrics.hpp"
#include "histo/nn/model.hpp"
#include "histo/nn/trainer.hpp"
#include "histo/tiler.hpp"

namespace histo {

/// Patches cut from every image of a manifest, resized to the model resolution.
struct PatchDataset {
  std::vector<nn::Tensor> samples;  // (1, 3, R, R) each
  std::vector<int> labels;
  std::vector<std::size_t> image_index;  // parent entry in the manifest
};

struct PatchAugment {
  int copies = 0;  // extra augmented copies per patch
  AugmentParams params;
  std::uint64_t seed = 0;
};

PatchDataset build_patch_dataset(const Manifest& manifest, const TileSpec& spec, int resolution,
                                 const PatchAugment& augment = {});

struct PatchTrainingConfig {
  TileSpec tile{32, 0.5, false};
  nn::TrainerConfig trainer;
  PatchAugment augment;
  /// Seeds the one-off shuffle of patches into batches.
  std::uint64_t batch_seed = 0;
};

/// Trains `model` on the patches of `train`, reporting patch-level validation
/// loss and accuracy on `valid` each epoch.
nn::History train_on_patches(nn::Model& model, const Manifest& train, const Manifest& valid,
                             const PatchTrainingConfig& cfg);

struct ImageLevelReport {
  std::vector<ClassLabel> truth;
  std::vector<ClassLabel> predicted;
  ConfusionMatrix image_matrix;
  ConfusionMatrix patch_matrix;
  double image_accuracy = 0.0;
  double patch_accuracy = 0.0;
};

/// Majority-vote classification of every manifest image, with patch-level
/// accuracy computed against the inherited image label.
ImageLevelReport evaluate_images(const nn::Model& model, const Manifest& manifest,
                                 const TileSpec& spec);

}  // namespace histo
