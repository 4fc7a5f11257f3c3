#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "histo/image.hpp"

namespace histo {

/// Square sliding window with fractional overlap between neighbours.
struct TileSpec {
  int window = 512;
  double overlap = 0.5;
  /// Add one window flush with the far edge when the lattice does not reach it.
  bool include_tail = false;

  /// window·(1−overlap); throws NonIntegerStride unless it is a positive integer.
  int stride() const;
};

struct PatchOrigin {
  int x = 0;
  int y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct PatchGrid {
  int cols = 0;
  int rows = 0;
  int window = 0;
  int stride = 0;
  std::vector<PatchOrigin> origins;  // row-major
};

struct Patch {
  int origin_x = 0;
  int origin_y = 0;
  int row = 0;
  int col = 0;
  Image pixels;
};

int grid_count(int dim, int window, int stride, bool include_tail = false);

/// Window start offsets along one axis, ascending.
std::vector<int> axis_positions(int dim, int window, int stride, bool include_tail = false);

PatchGrid plan_grid(int width, int height, const TileSpec& spec);

struct TilingResult {
  PatchGrid grid;
  std::vector<Patch> patches;
};

TilingResult extract_patches(const Image& image, const TileSpec& spec);

/// Writes `<stem>_r{row}_c{col}.png` per patch and `<stem>_grid.json`.
void write_patches(const std::filesystem::path& dir, const std::string& stem,
                   const TilingResult& tiling);

std::string grid_to_json(const PatchGrid& grid);

}  // namespace histo
