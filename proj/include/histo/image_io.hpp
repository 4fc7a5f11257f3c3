#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "histo/image.hpp"

namespace histo {

/// PNG codec. Decoded images are always converted to 8-bit RGB.
Image decode_png(std::span<const std::uint8_t> bytes);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace histo
