#include "histo/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "histo/error.hpp"

namespace histo {

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (bytes.empty() || !png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::UndecodableImage, bytes.empty() ? "empty buffer" : img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw Error(ErrorCode::UndecodableImage, "zero-sized PNG");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    std::string message = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::UndecodableImage, message);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), 3, std::move(pixels));
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  switch (image.channels()) {
    case 1: img.format = PNG_FORMAT_GRAY; break;
    case 3: img.format = PNG_FORMAT_RGB; break;
    case 4: img.format = PNG_FORMAT_RGBA; break;
    default: throw Error(ErrorCode::InvalidArgument, "PNG supports 1, 3 or 4 channels");
  }
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data().data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data().data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, img.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_png(image));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace histo
