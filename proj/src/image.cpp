#include "histo/image.hpp"

#include <algorithm>
#include <string>

#include "histo/error.hpp"

namespace histo {

Image::Image(int width, int height, int channels)
    : Image(width, height, channels,
            std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                      std::max(height, 0) * std::max(channels, 0))) {}

Image::Image(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1 || channels < 1) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::InvalidArgument,
                "image data length " + std::to_string(data_.size()) + " does not match " +
                    std::to_string(width) + "x" + std::to_string(height) + "x" +
                    std::to_string(channels));
  }
}

Image Image::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_) {
    throw Error(ErrorCode::InvalidArgument, "crop window outside image");
  }
  Image out(w, h, channels_);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * channels_;
  for (int row = 0; row < h; ++row) {
    const auto* src = data_.data() + (static_cast<std::size_t>(y + row) * width_ + x) * channels_;
    std::copy_n(src, row_bytes, out.data_.data() + row * row_bytes);
  }
  return out;
}

}  // namespace histo
