#include "histo/scaling.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "histo/error.hpp"

namespace histo {

void ScalingCoefficients::validate() const {
  if (!(alpha >= 1.0 && beta >= 1.0 && gamma >= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "scaling bases must be >= 1");
  }
  if (!(phi >= 0.0) || !std::isfinite(phi)) {
    throw Error(ErrorCode::InvalidArgument, "phi must be a finite non-negative number");
  }
}

Multipliers compound_scale(const ScalingCoefficients& c) {
  c.validate();
  return {std::pow(c.alpha, c.phi), std::pow(c.beta, c.phi), std::pow(c.gamma, c.phi)};
}

ConstraintCheck check_compute_constraint(const ScalingCoefficients& c, double tol) {
  c.validate();
  const double value = c.alpha * c.beta * c.beta * c.gamma * c.gamma;
  return {std::abs(value - 2.0) <= tol, value};
}

int round_filters(int n, double width_mult, int divisor) {
  if (n <= 0 || divisor <= 0) throw Error(ErrorCode::InvalidArgument, "filters and divisor > 0");
  if (width_mult == 1.0) return n;
  const double scaled = n * width_mult;
  int rounded = static_cast<int>((scaled + divisor / 2.0) / divisor) * divisor;
  if (rounded < divisor) rounded = divisor;
  if (rounded < 0.9 * scaled) rounded += divisor;
  return rounded;
}

int round_repeats(int n, double depth_mult) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  // 5·1.2 evaluates to 6.000000000000001; snap near-integers before taking the ceiling.
  const double scaled = n * depth_mult;
  const double nearest = std::round(scaled);
  const int out = std::abs(scaled - nearest) < 1e-9 ? static_cast<int>(nearest)
                                                    : static_cast<int>(std::ceil(scaled));
  return std::max(out, 1);
}

ArchSpec efficientnet_b0_base() {
  ArchSpec s;
  s.stem_filters = 32;
  s.head_filters = 1280;
  s.input_resolution = 224;
  s.phi = 0.0;
  s.blocks = {
      {1, 32, 16, 3, 1, 1.0, 0.25},   {2, 16, 24, 3, 2, 6.0, 0.25},
      {2, 24, 40, 5, 2, 6.0, 0.25},   {3, 40, 80, 3, 2, 6.0, 0.25},
      {3, 80, 112, 5, 1, 6.0, 0.25},  {4, 112, 192, 5, 2, 6.0, 0.25},
      {1, 192, 320, 3, 1, 6.0, 0.25},
  };
  s.sub_block_plan = plan_sub_blocks(s.blocks);
  return s;
}

std::vector<std::vector<SubBlockKind>> plan_sub_blocks(const std::vector<BlockConfig>& blocks) {
  std::vector<std::vector<SubBlockKind>> plan;
  plan.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::vector<SubBlockKind> kinds;
    for (int r = 0; r < blocks[b].repeats; ++r) {
      if (r > 0) {
        kinds.push_back(SubBlockKind::Repeat);
      } else {
        kinds.push_back(b == 0 ? SubBlockKind::BlockOneEntry : SubBlockKind::BlockEntry);
      }
    }
    plan.push_back(std::move(kinds));
  }
  return plan;
}

std::vector<std::string> check_arch(const ArchSpec& spec) {
  std::vector<std::string> problems;
  if (spec.blocks.size() != kNumBlocks) {
    problems.push_back("expected 7 blocks, found " + std::to_string(spec.blocks.size()));
  }
  if (spec.sub_block_plan.size() != spec.blocks.size()) {
    problems.push_back("sub-block plan does not cover every block");
    return problems;
  }
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& kinds = spec.sub_block_plan[b];
    const std::string where = "block " + std::to_string(b + 1);
    if (spec.blocks[b].repeats < 1) problems.push_back(where + ": repeats < 1");
    if (static_cast<int>(kinds.size()) != spec.blocks[b].repeats) {
      problems.push_back(where + ": plan length differs from repeats");
    }
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      SubBlockKind want = SubBlockKind::Repeat;
      if (i == 0) want = b == 0 ? SubBlockKind::BlockOneEntry : SubBlockKind::BlockEntry;
      if (kinds[i] != want) {
        problems.push_back(where + " sub-block " + std::to_string(i + 1) + ": kind " +
                           std::to_string(static_cast<int>(kinds[i])) + ", expected " +
                           std::to_string(static_cast<int>(want)));
      }
    }
  }
  return problems;
}

ArchSpec generate_architecture(const ArchSpec& base, const ScalingCoefficients& c, int divisor) {
  if (base.blocks.size() != kNumBlocks) {
    throw Error(ErrorCode::InvalidArgument, "base architecture must have 7 blocks");
  }
  const Multipliers m = compound_scale(c);
  ArchSpec out = base;
  out.phi = c.phi;
  if (m.depth == 1.0 && m.width == 1.0 && m.resolution == 1.0) {
    out.sub_block_plan = plan_sub_blocks(out.blocks);
    return out;
  }
  out.stem_filters = round_filters(base.stem_filters, m.width, divisor);
  out.head_filters = round_filters(base.head_filters, m.width, divisor);
  for (auto& block : out.blocks) {
    block.filters_in = round_filters(block.filters_in, m.width, divisor);
    block.filters_out = round_filters(block.filters_out, m.width, divisor);
    block.repeats = round_repeats(block.repeats, m.depth);
  }
  out.input_resolution =
      2 * static_cast<int>(std::lround(base.input_resolution * m.resolution / 2.0));
  out.sub_block_plan = plan_sub_blocks(out.blocks);
  return out;
}

ArchSpec efficientnet_variant(int phi, const ScalingCoefficients& bases) {
  if (phi < 0 || phi > 7) throw Error(ErrorCode::InvalidArgument, "variant must be B0..B7");
  ScalingCoefficients c = bases;
  c.phi = phi;
  return generate_architecture(efficientnet_b0_base(), c);
}

LayerInventory count_layers(const ArchSpec& spec) {
  LayerInventory inv;
  inv.conv += 1;  // stem
  inv.batch_norm += 1;
  inv.activation += 1;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    for (SubBlockKind kind : spec.sub_block_plan.at(b)) {
      if (block.expand_ratio != 1.0) {
        inv.conv += 1;
        inv.batch_norm += 1;
        inv.activation += 1;
      }
      inv.depthwise += 1;
      inv.batch_norm += 1;
      inv.activation += 1;
      if (block.se_ratio > 0) inv.squeeze_excite += 1;
      inv.conv += 1;  // projection
      inv.batch_norm += 1;
      if (kind == SubBlockKind::Repeat) inv.add += 1;
    }
  }
  inv.conv += 1;  // head
  inv.batch_norm += 1;
  inv.activation += 1;
  inv.pool += 1;
  inv.dense += 1;
  return inv;
}

void to_json(nlohmann::json& j, const BlockConfig& b) {
  j = {{"repeats", b.repeats}, {"filters_in", b.filters_in}, {"filters_out", b.filters_out},
       {"kernel", b.kernel},   {"stride", b.stride},         {"expand_ratio", b.expand_ratio},
       {"se_ratio", b.se_ratio}};
}

void from_json(const nlohmann::json& j, BlockConfig& b) {
  j.at("repeats").get_to(b.repeats);
  j.at("filters_in").get_to(b.filters_in);
  j.at("filters_out").get_to(b.filters_out);
  j.at("kernel").get_to(b.kernel);
  j.at("stride").get_to(b.stride);
  j.at("expand_ratio").get_to(b.expand_ratio);
  j.at("se_ratio").get_to(b.se_ratio);
}

void to_json(nlohmann::json& j, const ArchSpec& s) {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& kinds : s.sub_block_plan) {
    nlohmann::json row = nlohmann::json::array();
    for (auto k : kinds) row.push_back(static_cast<int>(k));
    plan.push_back(row);
  }
  j = {{"stem_filters", s.stem_filters},
       {"blocks", s.blocks},
       {"head_filters", s.head_filters},
       {"input_resolution", s.input_resolution},
       {"sub_block_plan", plan},
       {"phi", s.phi}};
}

void from_json(const nlohmann::json& j, ArchSpec& s) {
  j.at("stem_filters").get_to(s.stem_filters);
  j.at("blocks").get_to(s.blocks);
  j.at("head_filters").get_to(s.head_filters);
  j.at("input_resolution").get_to(s.input_resolution);
  s.phi = j.value("phi", -1.0);
  if (j.contains("sub_block_plan")) {
    s.sub_block_plan.clear();
    for (const auto& row : j.at("sub_block_plan")) {
      std::vector<SubBlockKind> kinds;
      for (const auto& k : row) kinds.push_back(static_cast<SubBlockKind>(k.get<int>()));
      s.sub_block_plan.push_back(std::move(kinds));
    }
  } else {
    s.sub_block_plan = plan_sub_blocks(s.blocks);
  }
}

std::string format_block_table(const ArchSpec& spec) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %7s %6s %6s %6s %6s %6s %5s  %s\n", "block", "repeats",
                "in", "out", "kernel", "stride", "expand", "se", "plan");
  os << line;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& k = spec.blocks[b];
    std::string plan;
    for (auto kind : spec.sub_block_plan.at(b)) {
      if (!plan.empty()) plan += ",";
      plan += std::to_string(static_cast<int>(kind));
    }
    std::snprintf(line, sizeof line, "%-6zu %7d %6d %6d %6d %6d %6.1f %5.2f  %s\n", b + 1,
                  k.repeats, k.filters_in, k.filters_out, k.kernel, k.stride, k.expand_ratio,
                  k.se_ratio, plan.c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "stem %d  head %d  resolution %d\n", spec.stem_filters,
                spec.head_filters, spec.input_resolution);
  os << line;
  return os.str();
}

}  // namespace histo
