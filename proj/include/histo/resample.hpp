#pragma once

#include <array>

#include "histo/image.hpp"

namespace histo {

/// Edge-inclusive mirror: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2, period 2n.
int reflect_index(long long i, int n);

/// Bilinear sample at continuous pixel coordinates (pixel centres at integers),
/// with out-of-range neighbours resolved by reflect_index.
double sample_bilinear(const Image& image, double x, double y, int channel);

/// Inverse affine map: output pixel (x, y) reads source at
/// (m[0]·x + m[1]·y + m[2], m[3]·x + m[4]·y + m[5]). Result is rounded half-up.
using AffineMap = std::array<double, 6>;
Image warp_inverse(const Image& image, const AffineMap& m);

/// Pixel-centre aligned bilinear resize.
Image resize_bilinear(const Image& image, int width, int height);

}  // namespace histo
