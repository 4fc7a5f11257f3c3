#include <doctest.h>

#include <cmath>

#include "histo/error.hpp"
#include "histo/nn/layers.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace histo;
using namespace histo::nn;

namespace {

constexpr double kTol = 1e-3;
constexpr int kTrials = 20;

ParamMap init(const Layer& layer, std::uint64_t seed) {
  ParamMap p;
  Rng rng(seed);
  layer.init_params(p, rng);
  return p;
}

}  // namespace

TEST_CASE("layer gradients match finite differences") {
  for (const auto& r : test::all_gradient_suites(kTrials)) {
    CAPTURE(r.layer);
    CHECK(r.trials == kTrials);
    CHECK(r.min_checked > 0);
    CHECK(r.max_rel_error <= kTol);
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor logits = test::random_tensor({3, 4}, rng, 30.0);
    const Tensor p = softmax(logits);
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) {
        CHECK(p[r * 4 + c] >= 0.0f);
        s += p[r * 4 + c];
      }
      CHECK(std::abs(s - 1.0) <= 1e-5);
    }
  }
  const Tensor uniform = softmax(Tensor({2, 4}));
  for (float v : uniform.values()) CHECK(v == 0.25f);
}

TEST_CASE("cross-entropy of the true class equals -ln p") {
  Tensor logits({1, 4}, std::vector<float>{0.3f, -1.0f, 2.0f, 0.5f});
  const Tensor p = softmax(logits);
  const std::vector<int> label{2};
  CHECK(std::abs(softmax_cross_entropy(logits, label, nullptr) + std::log(p[2])) <= 1e-6);
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, bad, nullptr), Error);
}

TEST_CASE("swish limits") {
  const Swish s("act");
  Tensor x({1, 3}, std::vector<float>{0.0f, 20.0f, -30.0f});
  const Tensor y = s.forward(x, {}, nullptr);
  CHECK(y[0] == 0.0f);
  CHECK(std::abs(y[1] - 20.0) < 1e-6);
  CHECK(std::abs(y[2]) < 1e-6);
}

TEST_CASE("squeeze-excitation with zero excitation weights halves every channel") {
  const SqueezeExcite se("se", 3, 1);
  ParamMap p = init(se, 1);
  for (auto& v : p.at(se.expand().weight_name()).values()) v = 0.0f;
  for (auto& v : p.at(se.expand().bias_name()).values()) v = 0.0f;
  Rng rng(2);
  const Tensor x = test::random_tensor({2, 3, 4, 4}, rng);
  const Tensor y = se.forward(x, p, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i] * 0.5f);
}

TEST_CASE("batch norm applies the stored affine transform") {
  const BatchNorm bn("bn", 2);
  ParamMap p = init(bn, 0);
  p.at(bn.gamma_name()) = Tensor({2}, std::vector<float>{2.0f, 1.0f});
  p.at(bn.beta_name()) = Tensor({2}, std::vector<float>{0.5f, -1.0f});
  p.at(bn.mean_name()) = Tensor({2}, std::vector<float>{1.0f, 0.0f});
  p.at(bn.var_name()) = Tensor({2}, std::vector<float>{4.0f, 1.0f});
  Tensor x({1, 2, 1, 1}, std::vector<float>{3.0f, 2.0f});
  const Tensor y = bn.forward(x, p, nullptr);
  CHECK(y[0] == doctest::Approx(2.0 * 2.0 / std::sqrt(4.0 + 1e-3) + 0.5).epsilon(1e-6));
  CHECK(y[1] == doctest::Approx(2.0 / std::sqrt(1.0 + 1e-3) - 1.0).epsilon(1e-6));
  const auto trainable = bn.trainable_params();
  CHECK(std::find(trainable.begin(), trainable.end(), bn.mean_name()) == trainable.end());
}

TEST_CASE("training forward records batch statistics") {
  const BatchNorm bn("bn", 1);
  const ParamMap p = init(bn, 0);
  Tensor x({2, 1, 1, 2}, std::vector<float>{1.0f, 2.0f, 3.0f, 6.0f});
  Tape tape;
  tape.record_batch_stats = true;
  bn.forward(x, p, &tape);
  REQUIRE(tape.batch_stats.count("bn") == 1);
  CHECK(tape.batch_stats["bn"].mean[0] == doctest::Approx(3.0));
  CHECK(tape.batch_stats["bn"].var[0] == doctest::Approx(3.5));
}

TEST_CASE("conv2d same padding and stride shapes") {
  const Conv2d conv("c", 3, 5, 3, 2, false);
  CHECK(conv.output_shape({2, 3, 7, 8}) == Shape{2, 5, 4, 4});
  CHECK_THROWS_AS(conv.output_shape({2, 4, 7, 8}), Error);
  CHECK_THROWS_AS(Conv2d("even", 3, 3, 2, 1, false), Error);
  const DepthwiseConv2d dw("d", 4, 5, 1);
  CHECK(dw.output_shape({1, 4, 6, 6}) == Shape{1, 4, 6, 6});
}

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(12);
  const Conv2d conv("c", 2, 3, 3, 1, true);
  ParamMap p = init(conv, 3);
  test::scramble(p, rng);
  const Tensor x = test::random_tensor({1, 2, 4, 5}, rng);
  const Tensor y = conv.forward(x, p, nullptr);
  const Tensor& w = p.at(conv.weight_name());  // (out, in, k, k)
  const Tensor& b = p.at(conv.bias_name());
  for (int o = 0; o < 3; ++o)
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 5; ++c) {
        double acc = b[o];
        for (int i = 0; i < 2; ++i)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = r + ky - 1, xx = c + kx - 1;
              if (yy < 0 || yy >= 4 || xx < 0 || xx >= 5) continue;
              acc += static_cast<double>(w[((o * 2 + i) * 3 + ky) * 3 + kx]) * x[(i * 4 + yy) * 5 + xx];
            }
        CHECK(y[(o * 4 + r) * 5 + c] == doctest::Approx(acc).epsilon(1e-5));
      }
}

TEST_CASE("mbconv residual only for stride-1 repeats") {
  MBConv::Options o;
  o.in_channels = 4;
  o.out_channels = 4;
  o.kind = 3;
  o.expand_ratio = 6.0;
  CHECK(MBConv("m", o).has_residual());
  o.kind = 2;
  CHECK_FALSE(MBConv("m", o).has_residual());
  o.kind = 3;
  o.out_channels = 8;
  CHECK_THROWS_AS(MBConv("m", o), Error);
}

TEST_CASE("layers rebuild from their config") {
  MBConv::Options o;
  o.in_channels = 3;
  o.out_channels = 6;
  o.kind = 2;
  o.expand_ratio = 6.0;
  o.stride = 2;
  const MBConv m("block2.0", o);
  const LayerPtr back = layer_from_json(m.config());
  CHECK(back->config() == m.config());
  CHECK(back->layer_count() == m.layer_count());
  CHECK(back->output_shape({1, 3, 8, 8}) == m.output_shape({1, 3, 8, 8}));
}
