#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace histo {

/// Interleaved 8-bit raster, row-major, `channels` samples per pixel.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3);
  Image(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  /// Copy of the window [x, x+w) × [y, y+h); the window must lie inside the image.
  Image crop(int x, int y, int w, int h) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace histo
