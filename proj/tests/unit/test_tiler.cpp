#include <doctest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/tiler.hpp"
#include "support.hpp"

using namespace histo;

namespace {

// Every start offset p with p % stride == 0 and p + window <= dim, plus the
// flush tail when requested.
std::vector<int> enumerate_positions(int dim, int window, int stride, bool tail) {
  std::vector<int> out;
  for (int p = 0; p + window <= dim; ++p)
    if (p % stride == 0) out.push_back(p);
  if (tail && out.back() + window < dim) out.push_back(dim - window);
  return out;
}

}  // namespace

TEST_CASE("grid_count matches brute-force enumeration") {
  CHECK(grid_count(2048, 512, 256) == 7);
  CHECK(grid_count(1536, 512, 256) == 5);
  CHECK(grid_count(512, 512, 256) == 1);
  CHECK(grid_count(600, 512, 256) == 1);
  CHECK(grid_count(600, 512, 256, true) == 2);
  CHECK(axis_positions(600, 512, 256, true) == std::vector<int>{0, 88});

  for (int dim = 1; dim <= 90; ++dim)
    for (int window = 1; window <= dim; ++window)
      for (int stride = 1; stride <= window; ++stride)
        for (bool tail : {false, true}) {
          const auto expected = enumerate_positions(dim, window, stride, tail);
          REQUIRE(grid_count(dim, window, stride, tail) == static_cast<int>(expected.size()));
          REQUIRE(axis_positions(dim, window, stride, tail) == expected);
        }
}

TEST_CASE("grid_count rejects a window larger than the dimension") {
  try {
    grid_count(100, 128, 64);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowExceedsDim);
  }
}

TEST_CASE("stride must be a positive integer") {
  CHECK(TileSpec{512, 0.5}.stride() == 256);
  CHECK(TileSpec{32, 0.75}.stride() == 8);
  CHECK(TileSpec{32, 0.0}.stride() == 32);
  for (TileSpec bad : {TileSpec{3, 0.5}, TileSpec{10, 0.33}, TileSpec{8, 1.0}, TileSpec{8, -0.5}}) {
    try {
      bad.stride();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::NonIntegerStride || e.code() == ErrorCode::InvalidArgument));
    }
  }
}

TEST_CASE("2048x1536 at 512/0.5 gives the 7x5 grid of 35 patches") {
  const Image img = test::coordinate_image(2048, 1536);
  const auto r = extract_patches(img, TileSpec{512, 0.5});
  CHECK(r.grid.cols == 7);
  CHECK(r.grid.rows == 5);
  REQUIRE(r.patches.size() == 35);
  for (std::size_t i = 0; i < r.patches.size(); ++i) {
    const auto& p = r.patches[i];
    CHECK(p.origin_x % 256 == 0);
    CHECK(p.origin_y % 256 == 0);
    CHECK(p.row == static_cast<int>(i) / 7);
    CHECK(p.col == static_cast<int>(i) % 7);
    CHECK(p.pixels.width() == 512);
    CHECK(p.pixels == img.crop(p.origin_x, p.origin_y, 512, 512));
  }
}

TEST_CASE("small grids") {
  CHECK(extract_patches(test::random_image(512, 512, 1), {512, 0.5}).patches.size() == 1);
  const auto r = extract_patches(test::random_image(1024, 768, 2), {512, 0.5});
  CHECK(r.grid.cols == 3);
  CHECK(r.grid.rows == 2);
  CHECK(r.patches.size() == 6);
}

TEST_CASE("image smaller than the window is rejected") {
  try {
    extract_patches(test::random_image(500, 600, 3), {512, 0.5});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ImageSmallerThanWindow);
  }
}

TEST_CASE("coverage and overlap consistency on lattice-aligned images") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int window = 4 + 2 * static_cast<int>(rng.below(6));
    const TileSpec spec{window, 0.5};
    const int stride = spec.stride();
    const int w = window + stride * static_cast<int>(rng.below(5));
    const int h = window + stride * static_cast<int>(rng.below(5));
    const Image img = test::random_image(w, h, rng.next_u64());
    const auto r = extract_patches(img, spec);
    CHECK(r.patches.size() == static_cast<std::size_t>(grid_count(w, window, stride)) *
                                  grid_count(h, window, stride));
    std::vector<int> covered(static_cast<std::size_t>(w) * h, 0);
    std::set<std::pair<int, int>> origins;
    for (const auto& p : r.patches) {
      origins.insert({p.origin_x, p.origin_y});
      CHECK(p.origin_x % stride == 0);
      CHECK(p.origin_y % stride == 0);
      for (int y = 0; y < window; ++y)
        for (int x = 0; x < window; ++x) {
          ++covered[(p.origin_y + y) * w + p.origin_x + x];
          for (int c = 0; c < 3; ++c)
            REQUIRE(p.pixels.at(x, y, c) == img.at(p.origin_x + x, p.origin_y + y, c));
        }
    }
    CHECK(origins.size() == r.patches.size());
    CHECK(std::all_of(covered.begin(), covered.end(), [](int n) { return n >= 1; }));
  }
}

TEST_CASE("tail windows are flush with the far edge and deduplicated") {
  const auto r = extract_patches(test::random_image(600, 520, 4), {512, 0.5, true});
  CHECK(r.grid.cols == 2);
  CHECK(r.grid.rows == 2);
  CHECK(r.patches.back().origin_x == 88);
  CHECK(r.patches.back().origin_y == 8);
  const auto even = extract_patches(test::random_image(768, 512, 5), {512, 0.5, true});
  CHECK(even.patches.size() == 2);
}

TEST_CASE("extraction is pure") {
  const Image img = test::random_image(96, 64, 6);
  const auto a = extract_patches(img, {32, 0.5});
  const auto b = extract_patches(img, {32, 0.5});
  REQUIRE(a.patches.size() == b.patches.size());
  for (std::size_t i = 0; i < a.patches.size(); ++i) CHECK(a.patches[i].pixels == b.patches[i].pixels);
}

TEST_CASE("write_patches names files by grid position and writes the sidecar") {
  test::TempDir dir;
  const Image img = test::random_image(64, 48, 7);
  const auto r = extract_patches(img, {32, 0.5});
  write_patches(dir.path(), "slide", r);
  CHECK(read_png(dir / "slide_r0_c0.png") == r.patches[0].pixels);
  CHECK(read_png(dir / "slide_r1_c2.png") == r.patches.back().pixels);
  std::ifstream in(dir / "slide_grid.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["cols"] == 3);
  CHECK(j["rows"] == 2);
  CHECK(j["window"] == 32);
  CHECK(j["stride"] == 16);
  REQUIRE(j["origins"].size() == 6);
  CHECK(j["origins"][5] == nlohmann::json::array({32, 16}));
}
