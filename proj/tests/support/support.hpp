#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "histo/image.hpp"
#include "histo/nn/layers.hpp"
#include "histo/rng.hpp"

namespace histo::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("histo-test-" + std::to_string((static_cast<std::uint64_t>(rd()) << 32) | rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Image random_image(int w, int h, std::uint64_t seed, int lo = 0, int hi = 255) {
  Rng rng(seed);
  Image img(w, h, 3);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(lo + rng.below(hi - lo + 1));
  return img;
}

/// Image whose pixel (x, y) encodes its own coordinates, so any patch can be
/// traced back to its source region.
inline Image coordinate_image(int w, int h) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(x & 0xFF);
      img.at(x, y, 1) = static_cast<std::uint8_t>(y & 0xFF);
      img.at(x, y, 2) = static_cast<std::uint8_t>(((x >> 8) << 4) | (y >> 8));
    }
  return img;
}

inline nn::Tensor random_tensor(const nn::Shape& shape, Rng& rng, double scale = 1.0) {
  nn::Tensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// |a − n| / max(|a|, |n|, floor): relative where gradients are meaningful,
/// absolute near zero where float32 finite differences carry only noise.
inline double rel_error(double analytic, double numeric, double floor = 1e-2) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Fourth-order central difference of eval() with respect to `slot`. The step
/// is the mean of the float-rounded offsets actually applied. Restores `slot`.
template <class Eval>
double five_point_derivative(float& slot, double h, Eval&& eval) {
  const float saved = slot;
  auto at = [&](double k) {
    slot = static_cast<float>(saved + k * h);
    return std::pair{eval(), static_cast<double>(slot) - saved};
  };
  const auto [f2, d2] = at(2.0);
  const auto [f1, d1] = at(1.0);
  const auto [m1, e1] = at(-1.0);
  const auto [m2, e2] = at(-2.0);
  slot = saved;
  const double step = (d2 - e2 + 2.0 * (d1 - e1)) / 8.0;
  return (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * step);
}

/// Compares a layer's analytic input and parameter gradients with finite
/// differences of L = Σ out·w for a fixed random projection w.
inline GradCheck check_layer(const nn::Layer& layer, const nn::Shape& in_shape,
                             nn::ParamMap params, std::uint64_t seed, double eps = 5e-2) {
  Rng rng(seed);
  nn::Tensor x = random_tensor(in_shape, rng);
  const nn::Shape out_shape = layer.output_shape(in_shape);
  const nn::Tensor proj = random_tensor(out_shape, rng);

  auto loss = [&](const nn::Tensor& input, const nn::ParamMap& p) {
    const nn::Tensor y = layer.forward(input, p, nullptr);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * proj[i];
    return s;
  };

  nn::Tape tape;
  layer.forward(x, params, &tape);
  nn::ParamMap grads;
  const nn::Tensor gx = layer.backward(proj, params, tape, grads);

  GradCheck out;
  auto probe = [&](float& slot, double analytic, auto&& eval) {
    const double numeric = five_point_derivative(slot, eps, eval);
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, numeric));
    ++out.checked;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe(x[i], gx[i], [&] { return loss(x, params); });
  }
  for (const auto& name : layer.trainable_params()) {
    nn::Tensor& p = params.at(name);
    const nn::Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      probe(p[i], g[i], [&] { return loss(x, params); });
    }
  }
  return out;
}

/// Analytic logits gradient of mean softmax cross-entropy against finite differences.
inline GradCheck check_softmax_xent(int batch, int classes, std::uint64_t seed, double eps = 5e-2) {
  Rng rng(seed);
  nn::Tensor logits = random_tensor({batch, classes}, rng, 3.0);
  std::vector<int> labels;
  for (int i = 0; i < batch; ++i) labels.push_back(static_cast<int>(rng.below(classes)));
  nn::Tensor grad;
  nn::softmax_cross_entropy(logits, labels, &grad);
  GradCheck out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double numeric = five_point_derivative(
        logits[i], eps, [&] { return nn::softmax_cross_entropy(logits, labels, nullptr); });
    out.max_rel_error = std::max(out.max_rel_error, rel_error(grad[i], numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace histo::test
