#include "histo/aggregate.hpp"

#include <cmath>

#include "histo/error.hpp"
#include "histo/resample.hpp"

namespace histo {

void VoteTally::add_vote(ClassLabel label) {
  ++counts[index_of(label)];
  ++total_patches;
}

void VoteTally::add(const ClassProbs& probs) {
  add_vote(argmax_label(probs));
  for (int c = 0; c < kNumClasses; ++c) prob_sums[c] += probs[c];
}

ClassLabel argmax_label(const ClassProbs& probs) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (probs[c] > probs[best]) best = c;
  return label_from_index(best);
}

VoteTally tally_from_probs(std::span<const ClassProbs> rows) {
  VoteTally tally;
  std::array<double, kNumClasses> compensation{};
  for (const auto& row : rows) {
    tally.add_vote(argmax_label(row));
    for (int c = 0; c < kNumClasses; ++c) {
      const double sum = tally.prob_sums[c];
      const double t = sum + row[c];
      compensation[c] += std::abs(sum) >= std::abs(row[c]) ? (sum - t) + row[c] : (row[c] - t) + sum;
      tally.prob_sums[c] = t;
    }
  }
  for (int c = 0; c < kNumClasses; ++c) tally.prob_sums[c] += compensation[c];
  return tally;
}

VoteTally tally_from_labels(std::span<const ClassLabel> labels) {
  VoteTally tally;
  for (ClassLabel l : labels) tally.add_vote(l);
  return tally;
}

ClassLabel majority_vote(const VoteTally& tally) {
  if (tally.total_patches < 1) throw Error(ErrorCode::EmptyTally, "no patches were voted");
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (tally.counts[c] > tally.counts[best] ||
        (tally.counts[c] == tally.counts[best] && tally.prob_sums[c] > tally.prob_sums[best])) {
      best = c;
    }
  }
  return label_from_index(best);
}

ImageClassification classify_image(const nn::Model& model, const Image& image,
                                   const TileSpec& spec, int batch_size) {
  if (model.empty()) throw Error(ErrorCode::ModelNotLoaded, "no model");
  if (model.num_classes() != kNumClasses) {
    throw Error(ErrorCode::ShapeMismatch, "model must predict the four tissue classes");
  }
  if (batch_size < 1) batch_size = 1;
  const TilingResult tiling = extract_patches(image, spec);
  const int res = model.input_resolution();

  ImageClassification out;
  out.grid = tiling.grid;
  out.patch_probs.reserve(tiling.patches.size());
  std::vector<Image> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const nn::Tensor probs = model.predict_probs(nn::images_to_tensor(pending));
    for (std::size_t i = 0; i < pending.size(); ++i) {
      ClassProbs row{};
      for (int c = 0; c < kNumClasses; ++c) row[c] = probs[i * kNumClasses + c];
      out.patch_probs.push_back(row);
    }
    pending.clear();
  };
  for (const auto& patch : tiling.patches) {
    pending.push_back(resize_bilinear(patch.pixels, res, res));
    if (static_cast<int>(pending.size()) == batch_size) flush();
  }
  flush();

  out.tally = tally_from_probs(out.patch_probs);
  out.patch_labels.reserve(out.patch_probs.size());
  for (const auto& row : out.patch_probs) out.patch_labels.push_back(argmax_label(row));
  out.label = majority_vote(out.tally);
  return out;
}

}  // namespace histo
