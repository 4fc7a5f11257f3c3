#pragma once

#include <cstdint>
#include <string>

#include "histo/image.hpp"
#include "histo/rng.hpp"

namespace histo {

enum class FillMode { Reflect };

/// Geometric augmentation ranges. Defaults: zoom 0.2, rotation ±40°, shifts 0.2,
/// both flips, reflect fill.
struct AugmentParams {
  double zoom_range = 0.2;
  double rotation_range = 40.0;
  double width_shift = 0.2;
  double height_shift = 0.2;
  bool horizontal_flip = true;
  bool vertical_flip = true;
  FillMode fill = FillMode::Reflect;

  void validate() const;
};

AugmentParams augment_params_from_json(const std::string& text);
std::string augment_params_to_json(const AugmentParams& params);

enum class FlipAxis { Horizontal, Vertical };

Image flip(const Image& image, FlipAxis axis);

/// Rotates content counter-clockwise (as displayed) about the image centre.
Image rotate(const Image& image, double degrees);

/// Shifts content right by dx·width and down by dy·height pixels.
Image translate(const Image& image, double dx, double dy);

/// Centre-anchored rescale; factor > 1 magnifies.
Image zoom(const Image& image, double factor);

/// One draw of the random transform parameters.
struct AugmentDraw {
  double zoom = 1.0;
  double angle = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool hflip = false;
  bool vflip = false;
};

/// Consumes exactly six uniforms from `rng`, in order: zoom, angle, dx, dy,
/// hflip, vflip. Disabled flips still consume their draw.
AugmentDraw draw_augment(const AugmentParams& params, Rng& rng);

/// Applies zoom, rotate, translate, horizontal flip, vertical flip in that order.
Image apply_augment(const Image& image, const AugmentDraw& draw);

Image random_augment(const Image& image, const AugmentParams& params, std::uint64_t seed);

}  // namespace histo
