#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace histo {

/// Compound scaling bases and exponent. Depth, width and resolution grow as
/// alpha^phi, beta^phi and gamma^phi.
struct ScalingCoefficients {
  double alpha = 1.2;
  double beta = 1.1;
  double gamma = 1.15;
  double phi = 0.0;

  void validate() const;
};

struct Multipliers {
  double depth = 1.0;
  double width = 1.0;
  double resolution = 1.0;
};

Multipliers compound_scale(const ScalingCoefficients& c);

struct ConstraintCheck {
  bool pass = false;
  double value = 0.0;  // alpha·beta²·gamma²
};

/// FLOPs grow with depth·width²·resolution², so one unit of phi should double compute.
ConstraintCheck check_compute_constraint(const ScalingCoefficients& c, double tol);

/// Nearest multiple of `divisor` to n·width_mult, at least `divisor`, bumped by one
/// divisor when rounding lost more than 10%. A multiplier of exactly 1 returns n.
int round_filters(int n, double width_mult, int divisor = 8);

/// ceil(n·depth_mult), at least 1.
int round_repeats(int n, double depth_mult);

/// Kind 1 opens block 1 (no expansion stage, no residual). Kind 2 opens blocks
/// 2–7 (expansion, stride and width change, no residual). Kind 3 is every
/// repeat after the first (same shape in and out, residual add).
enum class SubBlockKind : int { BlockOneEntry = 1, BlockEntry = 2, Repeat = 3 };

struct BlockConfig {
  int repeats = 1;
  int filters_in = 0;
  int filters_out = 0;
  int kernel = 3;
  int stride = 1;
  double expand_ratio = 1.0;
  double se_ratio = 0.25;

  friend bool operator==(const BlockConfig&, const BlockConfig&) = default;
};

inline constexpr int kNumBlocks = 7;

struct ArchSpec {
  int stem_filters = 32;
  std::vector<BlockConfig> blocks;
  int head_filters = 1280;
  int input_resolution = 224;
  std::vector<std::vector<SubBlockKind>> sub_block_plan;
  /// Scaling exponent this spec was generated with; negative when hand-built.
  double phi = 0.0;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// The shipped B0 baseline block table.
ArchSpec efficientnet_b0_base();

/// Sub-block kinds for the given repeat counts.
std::vector<std::vector<SubBlockKind>> plan_sub_blocks(const std::vector<BlockConfig>& blocks);

/// Empty when the block count, repeat counts and sub-block placement rules all hold.
std::vector<std::string> check_arch(const ArchSpec& spec);

ArchSpec generate_architecture(const ArchSpec& base, const ScalingCoefficients& c,
                               int divisor = 8);

/// B0..B7 from the shipped baseline and default coefficients.
ArchSpec efficientnet_variant(int phi, const ScalingCoefficients& bases = {});

struct LayerInventory {
  int conv = 0;
  int depthwise = 0;
  int batch_norm = 0;
  int activation = 0;
  int squeeze_excite = 0;
  int add = 0;
  int pool = 0;
  int dense = 0;
  int total() const {
    return conv + depthwise + batch_norm + activation + squeeze_excite + add + pool + dense;
  }
};

LayerInventory count_layers(const ArchSpec& spec);

void to_json(nlohmann::json& j, const BlockConfig& b);
void from_json(const nlohmann::json& j, BlockConfig& b);
void to_json(nlohmann::json& j, const ArchSpec& s);
void from_json(const nlohmann::json& j, ArchSpec& s);

/// Aligned text table of the block configuration.
std::string format_block_table(const ArchSpec& spec);

}  // namespace histo
