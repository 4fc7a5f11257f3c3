#pragma once

#include <array>
#include <span>
#include <vector>

#include "histo/image.hpp"
#include "histo/labels.hpp"
#include "histo/nn/model.hpp"
#include "histo/tiler.hpp"

namespace histo {

using ClassProbs = std::array<double, kNumClasses>;

/// Per-class patch votes for one image.
struct VoteTally {
  std::array<int, kNumClasses> counts{};
  std::array<double, kNumClasses> prob_sums{};
  int total_patches = 0;

  void add_vote(ClassLabel label);
  /// Votes for the argmax (lowest index on exact ties) and adds the row to prob_sums.
  void add(const ClassProbs& probs);
};

/// Neumaier-compensated sums over rows taken in the given order.
VoteTally tally_from_probs(std::span<const ClassProbs> rows);
VoteTally tally_from_labels(std::span<const ClassLabel> labels);

ClassLabel argmax_label(const ClassProbs& probs);

/// Most votes; ties go to the larger probability mass, then the lower class index.
ClassLabel majority_vote(const VoteTally& tally);

struct ImageClassification {
  ClassLabel label = ClassLabel::Normal;
  VoteTally tally;
  PatchGrid grid;
  std::vector<ClassLabel> patch_labels;  // row-major
  std::vector<ClassProbs> patch_probs;
};

/// Tiles the image, resizes each patch to the model resolution (bilinear),
/// predicts every patch and takes the majority vote.
ImageClassification classify_image(const nn::Model& model, const Image& image,
                                   const TileSpec& spec, int batch_size = 8);

}  // namespace histo
