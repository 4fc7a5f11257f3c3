#include "histo/resample.hpp"

#include <algorithm>
#include <cmath>

#include "histo/error.hpp"

namespace histo {

int reflect_index(long long i, int n) {
  const long long period = 2LL * n;
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<int>(m < n ? m : period - 1 - m);
}

namespace {

inline std::uint8_t round_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

double sample_bilinear(const Image& image, double x, double y, int channel) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const auto ix = static_cast<long long>(fx);
  const auto iy = static_cast<long long>(fy);
  const int x0 = reflect_index(ix, image.width());
  const int x1 = reflect_index(ix + 1, image.width());
  const int y0 = reflect_index(iy, image.height());
  const int y1 = reflect_index(iy + 1, image.height());
  const double top = (1.0 - ax) * image.at(x0, y0, channel) + ax * image.at(x1, y0, channel);
  const double bottom = (1.0 - ax) * image.at(x0, y1, channel) + ax * image.at(x1, y1, channel);
  return (1.0 - ay) * top + ay * bottom;
}

Image warp_inverse(const Image& image, const AffineMap& m) {
  Image out(image.width(), image.height(), image.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double sx = m[0] * x + m[1] * y + m[2];
      const double sy = m[3] * x + m[4] * y + m[5];
      for (int c = 0; c < out.channels(); ++c) {
        out.at(x, y, c) = round_u8(sample_bilinear(image, sx, sy, c));
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "resize to empty size");
  if (width == image.width() && height == image.height()) return image;
  const double scale_x = static_cast<double>(image.width()) / width;
  const double scale_y = static_cast<double>(image.height()) / height;
  Image out(width, height, image.channels());
  for (int y = 0; y < height; ++y) {
    const double sy = (y + 0.5) * scale_y - 0.5;
    for (int x = 0; x < width; ++x) {
      const double sx = (x + 0.5) * scale_x - 0.5;
      for (int c = 0; c < image.channels(); ++c) {
        out.at(x, y, c) = round_u8(sample_bilinear(image, sx, sy, c));
      }
    }
  }
  return out;
}

}  // namespace histo
