#include "histo/tiler.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "histo/error.hpp"
#include "histo/image_io.hpp"

namespace histo {

int TileSpec::stride() const {
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlap must lie in [0, 1)");
  }
  const double exact = window * (1.0 - overlap);
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 || rounded < 1.0) {
    throw Error(ErrorCode::NonIntegerStride,
                "window " + std::to_string(window) + " with overlap " + std::to_string(overlap) +
                    " gives stride " + std::to_string(exact));
  }
  return static_cast<int>(rounded);
}

int grid_count(int dim, int window, int stride, bool include_tail) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (window > dim) {
    throw Error(ErrorCode::WindowExceedsDim,
                "window " + std::to_string(window) + " > dimension " + std::to_string(dim));
  }
  const int span = dim - window;
  int count = span / stride + 1;
  if (include_tail && span % stride != 0) ++count;
  return count;
}

std::vector<int> axis_positions(int dim, int window, int stride, bool include_tail) {
  const int count = grid_count(dim, window, stride, include_tail);
  std::vector<int> out;
  out.reserve(count);
  for (int pos = 0; pos + window <= dim; pos += stride) out.push_back(pos);
  if (include_tail && out.back() != dim - window) out.push_back(dim - window);
  return out;
}

PatchGrid plan_grid(int width, int height, const TileSpec& spec) {
  const int stride = spec.stride();
  if (width < spec.window || height < spec.window) {
    throw Error(ErrorCode::ImageSmallerThanWindow,
                std::to_string(width) + "x" + std::to_string(height) + " image, window " +
                    std::to_string(spec.window));
  }
  const auto xs = axis_positions(width, spec.window, stride, spec.include_tail);
  const auto ys = axis_positions(height, spec.window, stride, spec.include_tail);
  PatchGrid grid;
  grid.cols = static_cast<int>(xs.size());
  grid.rows = static_cast<int>(ys.size());
  grid.window = spec.window;
  grid.stride = stride;
  grid.origins.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) grid.origins.push_back({x, y});
  return grid;
}

TilingResult extract_patches(const Image& image, const TileSpec& spec) {
  TilingResult result;
  result.grid = plan_grid(image.width(), image.height(), spec);
  result.patches.reserve(result.grid.origins.size());
  for (std::size_t i = 0; i < result.grid.origins.size(); ++i) {
    const auto [x, y] = result.grid.origins[i];
    Patch patch;
    patch.origin_x = x;
    patch.origin_y = y;
    patch.row = static_cast<int>(i) / result.grid.cols;
    patch.col = static_cast<int>(i) % result.grid.cols;
    patch.pixels = image.crop(x, y, spec.window, spec.window);
    result.patches.push_back(std::move(patch));
  }
  return result;
}

std::string grid_to_json(const PatchGrid& grid) {
  nlohmann::json j;
  j["cols"] = grid.cols;
  j["rows"] = grid.rows;
  j["window"] = grid.window;
  j["stride"] = grid.stride;
  j["origins"] = nlohmann::json::array();
  for (const auto& o : grid.origins) j["origins"].push_back({o.x, o.y});
  return j.dump(2);
}

void write_patches(const std::filesystem::path& dir, const std::string& stem,
                   const TilingResult& tiling) {
  std::filesystem::create_directories(dir);
  for (const auto& patch : tiling.patches) {
    write_png(dir / (stem + "_r" + std::to_string(patch.row) + "_c" + std::to_string(patch.col) +
                     ".png"),
              patch.pixels);
  }
  const std::string sidecar = grid_to_json(tiling.grid) + "\n";
  write_file_atomic(dir / (stem + "_grid.json"),
                    {reinterpret_cast<const std::uint8_t*>(sidecar.data()), sidecar.size()});
}

}  // namespace histo
