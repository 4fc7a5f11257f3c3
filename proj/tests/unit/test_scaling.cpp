#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "histo/error.hpp"
#include "histo/rng.hpp"
#include "histo/scaling.hpp"
#include "oracles.hpp"

using namespace histo;

using test::plan_obeys_rules;
using test::random_base;

TEST_CASE("compound_scale") {
  ScalingCoefficients c;
  Multipliers m = compound_scale(c);
  CHECK(m.depth == 1.0);
  CHECK(m.width == 1.0);
  CHECK(m.resolution == 1.0);
  c.phi = 1;
  m = compound_scale(c);
  CHECK(m.depth == 1.2);
  CHECK(m.width == 1.1);
  CHECK(m.resolution == 1.15);
  c.phi = 3;
  CHECK(compound_scale(c).depth == doctest::Approx(1.728).epsilon(1e-14));
}

TEST_CASE("compound_scale is multiplicative and monotone in phi") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    ScalingCoefficients a{rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0),
                          rng.uniform(0.0, 3.0)};
    ScalingCoefficients b = a;
    b.phi = rng.uniform(0.0, 3.0);
    ScalingCoefficients ab = a;
    ab.phi = a.phi + b.phi;
    const Multipliers ma = compound_scale(a), mb = compound_scale(b), mab = compound_scale(ab);
    CHECK(std::abs(mab.depth - ma.depth * mb.depth) <= 1e-12 * mab.depth);
    CHECK(std::abs(mab.width - ma.width * mb.width) <= 1e-12 * mab.width);
    CHECK(std::abs(mab.resolution - ma.resolution * mb.resolution) <= 1e-12 * mab.resolution);
    CHECK(mab.depth >= ma.depth);
    CHECK(ma.depth >= 1.0);
  }
}

TEST_CASE("compute constraint") {
  auto r = check_compute_constraint({2.0, 1.0, 1.0, 0.0}, 0.0);
  CHECK(r.pass);
  CHECK(r.value == 2.0);
  r = check_compute_constraint({1.2, 1.1, 1.15, 0.0}, 0.1);
  CHECK(r.pass);
  CHECK(r.value == doctest::Approx(1.2 * 1.21 * 1.3225).epsilon(1e-14));
  CHECK(std::abs(r.value - 1.9203) <= 1e-4);
  r = check_compute_constraint({1.0, 1.0, 1.0, 0.0}, 0.1);
  CHECK_FALSE(r.pass);
  CHECK(r.value == 1.0);
}

TEST_CASE("coefficients below 1 are rejected") {
  CHECK_THROWS_AS((ScalingCoefficients{0.9, 1.1, 1.1, 0.0}.validate()), Error);
  CHECK_THROWS_AS((ScalingCoefficients{1.2, 1.1, 1.15, -1.0}.validate()), Error);
}

TEST_CASE("round_filters") {
  CHECK(round_filters(32, 1.0, 8) == 32);
  CHECK(round_filters(16, 1.5, 8) == 24);
  CHECK(round_filters(32, 1.1, 8) == 32);
  CHECK(round_filters(1280, 1.1, 8) == 1408);
  CHECK(round_filters(3, 1.1, 8) == 8);
  CHECK(round_filters(20, 1.0, 8) == 20);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.below(2000));
    const double w = rng.uniform(1.0, 3.0);
    const int f = round_filters(n, w, 8);
    CHECK(f % 8 == 0);
    CHECK(f >= 8);
    CHECK(f >= 0.9 * n * w);
  }
}

TEST_CASE("round_repeats") {
  CHECK(round_repeats(1, 1.0) == 1);
  CHECK(round_repeats(2, 1.2) == 3);
  CHECK(round_repeats(4, 1.0) == 4);
  CHECK(round_repeats(5, 1.2) == 6);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.below(20));
    const double d = rng.uniform(1.0, 4.0);
    const int r = round_repeats(n, d);
    CHECK(r >= n);
    CHECK(r >= n * d - 1e-9);
    CHECK(r < n * d + 1);
  }
}

TEST_CASE("generate_architecture") {
  const ArchSpec base = efficientnet_b0_base();
  CHECK(check_arch(base).empty());
  ScalingCoefficients c;
  CHECK(generate_architecture(base, c) == base);

  c.phi = 1;
  const ArchSpec b1 = generate_architecture(base, c);
  std::vector<int> repeats;
  for (const auto& b : b1.blocks) repeats.push_back(b.repeats);
  CHECK(repeats == std::vector<int>{2, 3, 3, 4, 4, 5, 2});
  CHECK(b1.input_resolution % 2 == 0);
  CHECK(b1.input_resolution == 258);
  CHECK(b1.head_filters == 1408);
  for (std::size_t i = 1; i < b1.blocks.size(); ++i) {
    CHECK(b1.blocks[i].filters_in == b1.blocks[i - 1].filters_out);
  }
  CHECK(b1.blocks[0].filters_in == b1.stem_filters);
}

TEST_CASE("variants B0-B3 obey the placement rules") {
  int prev_subblocks = 0;
  for (int phi = 0; phi <= 3; ++phi) {
    const ArchSpec s = efficientnet_variant(phi);
    CHECK(s.blocks.size() == 7);
    CHECK(check_arch(s).empty());
    CHECK(plan_obeys_rules(s));
    int subblocks = 0;
    for (const auto& b : s.blocks) subblocks += b.repeats;
    CHECK(subblocks >= prev_subblocks);
    prev_subblocks = subblocks;
  }
}

TEST_CASE("randomized base tables always produce valid plans") {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const ArchSpec base = random_base(rng);
    ScalingCoefficients c{rng.uniform(1.0, 1.5), rng.uniform(1.0, 1.5), rng.uniform(1.0, 1.5),
                          rng.uniform(0.0, 3.0)};
    const ArchSpec s = generate_architecture(base, c);
    REQUIRE(check_arch(s).empty());
    REQUIRE(plan_obeys_rules(s));
    REQUIRE(s.input_resolution % 2 == 0);
  }
}

TEST_CASE("check_arch reports broken plans") {
  ArchSpec s = efficientnet_b0_base();
  s.sub_block_plan[0][0] = SubBlockKind::BlockEntry;
  CHECK_FALSE(check_arch(s).empty());
  s = efficientnet_b0_base();
  s.sub_block_plan[3][1] = SubBlockKind::BlockEntry;
  CHECK_FALSE(check_arch(s).empty());
  s = efficientnet_b0_base();
  s.blocks.pop_back();
  s.sub_block_plan.pop_back();
  CHECK_FALSE(check_arch(s).empty());
  CHECK_THROWS_AS(generate_architecture(s, {}), Error);
}

TEST_CASE("architecture JSON round trip and layer inventory") {
  const ArchSpec s = efficientnet_variant(2);
  const nlohmann::json j = s;
  CHECK(j.get<ArchSpec>() == s);
  const LayerInventory b0 = count_layers(efficientnet_variant(0));
  const LayerInventory b3 = count_layers(efficientnet_variant(3));
  CHECK(b0.depthwise == 16);
  CHECK(b0.squeeze_excite == 16);
  CHECK(b3.total() > b0.total());
  CHECK(format_block_table(s).find("block") != std::string::npos);
}
