#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histo/image.hpp"
#include "histo/labels.hpp"
#include "histo/tiler.hpp"

namespace histo {

struct ManifestEntry {
  std::string path;
  ClassLabel label = ClassLabel::Normal;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  /// Non-fatal findings such as empty classes.
  std::vector<std::string> warnings;

  std::array<int, kNumClasses> counts() const;
  std::size_t size() const noexcept { return entries.size(); }
};

/// `<root>/<Class>/*` directory tree (files sorted by name) or a `path,label` CSV.
Manifest load_manifest(const std::filesystem::path& source);
Manifest load_manifest_dir(const std::filesystem::path& root);
/// Relative paths in the CSV are resolved against `base` when it is non-empty.
Manifest parse_manifest_csv(const std::string& text, const std::filesystem::path& base = {});

std::string manifest_to_csv(const Manifest& manifest);
void write_manifest_csv(const std::filesystem::path& path, const Manifest& manifest);

struct SplitRatios {
  double train = 0.7;
  double valid = 0.2;
  double test = 0.1;

  void validate() const;
};

/// Largest-remainder apportionment of n items; ties go to train, then valid, then test.
std::array<int, 3> apportion(int n, const SplitRatios& ratios);

struct SplitResult {
  Manifest train;
  Manifest valid;
  Manifest test;
};

/// Stratified per class: each class is shuffled with the seeded stream (classes
/// in label order) and cut by apportion().
SplitResult split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

/// train.csv, valid.csv, test.csv and summary.json {seed, ratios, counts}.
void write_split(const std::filesystem::path& dir, const SplitResult& result,
                 const SplitRatios& ratios, std::uint64_t seed);

struct ClassTexture {
  std::array<int, 3> background;
  std::array<int, 3> nucleus;
  int nuclei = 10;
  int min_radius = 2;
  int max_radius = 5;
};

/// Four separable stain-like textures used for desk-scale experiments.
struct SyntheticConfig {
  int images_per_class = 50;
  int image_size = 128;
  int noise = 12;
  std::uint64_t seed = 0;
  std::array<ClassTexture, kNumClasses> textures = default_textures();

  static std::array<ClassTexture, kNumClasses> default_textures();
};

/// Image number `index` of `label`; depends only on (cfg, label, index).
Image synthesize_image(const SyntheticConfig& cfg, ClassLabel label, int index);

/// Writes `<out>/<Class>/img_NNNN.png` and `<out>/manifest.csv`.
Manifest generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

struct LabeledPatch {
  Patch patch;
  ClassLabel label;
};

/// Every patch inherits the label of its parent image.
std::vector<LabeledPatch> labeled_patches(const Image& image, ClassLabel label,
                                          const TileSpec& spec);

}  // namespace histo
