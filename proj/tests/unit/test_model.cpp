#include <doctest.h>

#include <cmath>

#include "histo/error.hpp"
#include "histo/nn/model.hpp"
#include "support.hpp"

using namespace histo;
using namespace histo::nn;

namespace {

// 1x1 identity conv, pooling and a dense layer with hand-picked weights.
Model toy_model() {
  std::vector<LayerPtr> layers{std::make_shared<Conv2d>("conv", 3, 3, 1, 1, true),
                               std::make_shared<GlobalAvgPool>("pool"),
                               std::make_shared<Dense>("fc", 3, 4)};
  Model m = make_model(layers, 4, 2, 0);
  auto& w = m.params().at("conv.weight");
  for (auto& v : w.values()) v = 0.0f;
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
  m.params().at("fc.weight") = Tensor({4, 3}, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1, 1, -1, 0.5f});
  m.params().at("fc.bias") = Tensor({4}, std::vector<float>{0.1f, 0.0f, -0.2f, 0.3f});
  return m;
}

}  // namespace

TEST_CASE("B0-B3 map a 1x3xRxR input to 1x4") {
  std::size_t prev_params = 0;
  for (int phi = 0; phi <= 3; ++phi) {
    const ArchSpec spec = efficientnet_variant(phi);
    const Model m = build_model(spec, 4, 7);
    CHECK(m.input_resolution() == spec.input_resolution);
    CHECK(m.parameter_count() > prev_params);
    prev_params = m.parameter_count();
    CHECK(m.info()["phi"] == phi);
    if (phi <= 1) {
      const Tensor x({1, 3, spec.input_resolution, spec.input_resolution}, 0.5f);
      const Tensor p = m.predict_probs(x);
      CHECK(p.shape() == Shape{1, 4});
      CHECK(std::abs(p[0] + p[1] + p[2] + p[3] - 1.0) <= 1e-5);
    }
  }
}

TEST_CASE("same seed gives bit-identical weights") {
  const ArchSpec spec = efficientnet_variant(0);
  const Model a = build_model(spec, 4, 11);
  const Model b = build_model(spec, 4, 11);
  const Model c = build_model(spec, 4, 12);
  REQUIRE(a.params().size() == b.params().size());
  bool any_diff = false;
  for (const auto& [name, t] : a.params()) {
    CHECK(bit_equal(t, b.params().at(name)));
    any_diff = any_diff || !bit_equal(t, c.params().at(name));
  }
  CHECK(any_diff);
}

TEST_CASE("zero classifier gives uniform probabilities") {
  Model m = build_compact_model(16, 4, 4, 3);
  for (auto& v : m.params().at("classifier.weight").values()) v = 0.0f;
  for (auto& v : m.params().at("classifier.bias").values()) v = 0.0f;
  Rng rng(1);
  const Tensor p = m.predict_probs(test::random_tensor({3, 3, 16, 16}, rng));
  for (float v : p.values()) CHECK(v == 0.25f);
}

TEST_CASE("toy network matches a hand computation") {
  const Model m = toy_model();
  const Tensor x({1, 3, 2, 2}, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f,  //
                                                   1.0f, 1.0f, 0.0f, 0.0f,  //
                                                   0.5f, 0.5f, 0.5f, 0.5f});
  const double m0 = 0.25, m1 = 0.5, m2 = 0.5;
  const double logits[4] = {m0 + 0.1, m1, m2 - 0.2, m0 - m1 + 0.5 * m2 + 0.3};
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  const Tensor p = m.predict_probs(x);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(p[k] - std::exp(logits[k]) / z) <= 1e-5);
}

TEST_CASE("per-sample independence") {
  const Model m = build_compact_model(16, 4, 4, 5);
  Rng rng(2);
  const Tensor a = test::random_tensor({1, 3, 16, 16}, rng);
  const Tensor b = test::random_tensor({1, 3, 16, 16}, rng);
  Tensor ab({2, 3, 16, 16});
  Tensor ba({2, 3, 16, 16});
  Tensor aa({2, 3, 16, 16});
  const std::size_t n = a.size();
  std::copy_n(a.data(), n, ab.data());
  std::copy_n(b.data(), n, ab.data() + n);
  std::copy_n(b.data(), n, ba.data());
  std::copy_n(a.data(), n, ba.data() + n);
  std::copy_n(a.data(), n, aa.data());
  std::copy_n(a.data(), n, aa.data() + n);
  const Tensor pab = m.predict_probs(ab), pba = m.predict_probs(ba), paa = m.predict_probs(aa);
  const Tensor pa = m.predict_probs(a);
  for (int k = 0; k < 4; ++k) {
    CHECK(pab[k] == pba[4 + k]);
    CHECK(pab[4 + k] == pba[k]);
    CHECK(paa[k] == paa[4 + k]);
    CHECK(pa[k] == pab[k]);
  }
}

TEST_CASE("input shape is validated") {
  const Model m = build_compact_model(16, 4, 4, 5);
  CHECK_THROWS_AS(m.predict_probs(Tensor({1, 3, 8, 8})), Error);
  CHECK_THROWS_AS(m.predict_probs(Tensor({1, 1, 16, 16})), Error);
  std::vector<LayerPtr> bad{std::make_shared<GlobalAvgPool>("pool"),
                            std::make_shared<Dense>("fc", 3, 5)};
  CHECK_THROWS_AS(make_model(bad, 4, 8, 0), Error);
}

TEST_CASE("graph description rebuilds the same model") {
  const Model m = build_model(efficientnet_variant(0), 4, 9);
  const Model back = Model::from_graph(m.graph(), m.params());
  CHECK(back.graph() == m.graph());
  CHECK(back.layer_count() == m.layer_count());
  CHECK(m.graph()["padding"] == "same_symmetric_zero");
  const Model small = build_compact_model(16, 4, 4, 1);
  Rng rng(3);
  const Tensor x = test::random_tensor({2, 3, 16, 16}, rng);
  const Tensor p1 = small.predict_probs(x);
  const Tensor p2 = Model::from_graph(small.graph(), small.params()).predict_probs(x);
  CHECK(bit_equal(p1, p2));
}

TEST_CASE("images_to_tensor scales to [0,1] in NCHW order") {
  Image img(2, 1, 3);
  img.at(0, 0, 0) = 255;
  img.at(1, 0, 2) = 51;
  const Tensor t = images_to_tensor(std::span<const Image>(&img, 1));
  CHECK(t.shape() == Shape{1, 3, 1, 2});
  CHECK(t[0] == 1.0f);
  CHECK(t[5] == 0.2f);
  CHECK_THROWS_AS(images_to_tensor({}), Error);
}
