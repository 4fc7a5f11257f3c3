#include "histo/augment.hpp"

#include <cmath>
#include <numbers>
#include <nlohmann/json.hpp>

#include "histo/error.hpp"
#include "histo/resample.hpp"

namespace histo {

void AugmentParams::validate() const {
  if (zoom_range < 0 || rotation_range < 0 || width_shift < 0 || height_shift < 0) {
    throw Error(ErrorCode::InvalidArgument, "augmentation ranges must be non-negative");
  }
  if (rotation_range > 180) throw Error(ErrorCode::InvalidArgument, "rotation_range > 180");
  if (zoom_range >= 1) throw Error(ErrorCode::InvalidArgument, "zoom_range must be < 1");
  if (width_shift > 1 || height_shift > 1) {
    throw Error(ErrorCode::InvalidArgument, "shift ranges must be <= 1");
  }
}

AugmentParams augment_params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("augment config: ") + e.what());
  }
  AugmentParams p;
  p.zoom_range = j.value("zoom_range", p.zoom_range);
  p.rotation_range = j.value("rotation_range", p.rotation_range);
  p.width_shift = j.value("width_shift", p.width_shift);
  p.height_shift = j.value("height_shift", p.height_shift);
  p.horizontal_flip = j.value("horizontal_flip", p.horizontal_flip);
  p.vertical_flip = j.value("vertical_flip", p.vertical_flip);
  const auto fill = j.value("fill_mode", std::string("reflect"));
  if (fill != "reflect" && fill != "Reflect") {
    throw Error(ErrorCode::InvalidArgument, "unsupported fill_mode '" + fill + "'");
  }
  p.validate();
  return p;
}

std::string augment_params_to_json(const AugmentParams& p) {
  nlohmann::json j = {{"zoom_range", p.zoom_range},         {"rotation_range", p.rotation_range},
                      {"width_shift", p.width_shift},       {"height_shift", p.height_shift},
                      {"horizontal_flip", p.horizontal_flip}, {"vertical_flip", p.vertical_flip},
                      {"fill_mode", "reflect"}, {"rng", Rng::kAlgorithm}};
  return j.dump(2);
}

Image flip(const Image& image, FlipAxis axis) {
  Image out(image.width(), image.height(), image.channels());
  const int w = image.width();
  const int h = image.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = axis == FlipAxis::Horizontal ? w - 1 - x : x;
      const int sy = axis == FlipAxis::Vertical ? h - 1 - y : y;
      for (int c = 0; c < image.channels(); ++c) out.at(x, y, c) = image.at(sx, sy, c);
    }
  }
  return out;
}

namespace {

struct Centre {
  double x;
  double y;
};

Centre centre_of(const Image& image) {
  return {(image.width() - 1) / 2.0, (image.height() - 1) / 2.0};
}

}  // namespace

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const auto [cx, cy] = centre_of(image);
  const AffineMap m = {cs, -sn, cx - cs * cx + sn * cy, sn, cs, cy - sn * cx - cs * cy};
  return warp_inverse(image, m);
}

Image translate(const Image& image, double dx, double dy) {
  if (dx == 0.0 && dy == 0.0) return image;
  const double sx = dx * image.width();
  const double sy = dy * image.height();
  return warp_inverse(image, {1.0, 0.0, -sx, 0.0, 1.0, -sy});
}

Image zoom(const Image& image, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorCode::InvalidArgument, "zoom factor must be > 0");
  if (factor == 1.0) return image;
  const double inv = 1.0 / factor;
  const auto [cx, cy] = centre_of(image);
  return warp_inverse(image, {inv, 0.0, cx - inv * cx, 0.0, inv, cy - inv * cy});
}

AugmentDraw draw_augment(const AugmentParams& params, Rng& rng) {
  AugmentDraw d;
  d.zoom = rng.uniform(1.0 - params.zoom_range, 1.0 + params.zoom_range);
  d.angle = rng.uniform(-params.rotation_range, params.rotation_range);
  d.dx = rng.uniform(-params.width_shift, params.width_shift);
  d.dy = rng.uniform(-params.height_shift, params.height_shift);
  d.hflip = rng.bernoulli(0.5) && params.horizontal_flip;
  d.vflip = rng.bernoulli(0.5) && params.vertical_flip;
  return d;
}

Image apply_augment(const Image& image, const AugmentDraw& draw) {
  Image out = zoom(image, draw.zoom);
  out = rotate(out, draw.angle);
  out = translate(out, draw.dx, draw.dy);
  if (draw.hflip) out = flip(out, FlipAxis::Horizontal);
  if (draw.vflip) out = flip(out, FlipAxis::Vertical);
  return out;
}

Image random_augment(const Image& image, const AugmentParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  return apply_augment(image, draw_augment(params, rng));
}

}  // namespace histo
