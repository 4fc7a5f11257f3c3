#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <nlohmann/json.hpp>

#include "histo/augment.hpp"
#include "histo/error.hpp"
#include "histo/resample.hpp"
#include "support.hpp"

using namespace histo;

namespace {

// Reference resampler written against the stated conventions only.
int mirror(long long i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2LL * n - 1 - i;
  return static_cast<int>(i);
}

double bilinear(const Image& img, double x, double y, int c) {
  const long long x0 = static_cast<long long>(std::floor(x));
  const long long y0 = static_cast<long long>(std::floor(y));
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double wx = dx ? x - x0 : 1.0 - (x - x0);
      const double wy = dy ? y - y0 : 1.0 - (y - y0);
      acc += wx * wy * img.at(mirror(x0 + dx, img.width()), mirror(y0 + dy, img.height()), c);
    }
  return acc;
}

template <class SourceOf>
Image reference_warp(const Image& img, SourceOf source_of) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto [sx, sy] = source_of(x, y);
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(
            static_cast<int>(std::floor(bilinear(img, sx, sy, c) + 0.5)), 0, 255));
      }
    }
  return out;
}

// Counter-clockwise as displayed: work in y-up coordinates about the centre and
// pull each output point back through the opposite rotation.
Image reference_rotate(const Image& img, double degrees) {
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  const std::complex<double> back = std::polar(1.0, -degrees * std::numbers::pi / 180.0);
  return reference_warp(img, [&](int x, int y) {
    const std::complex<double> p(x - cx, cy - y);
    const std::complex<double> s = p * back;
    return std::pair{cx + s.real(), cy - s.imag()};
  });
}

Image reference_zoom(const Image& img, double factor) {
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  return reference_warp(img, [&](int x, int y) {
    return std::pair{cx + (x - cx) / factor, cy + (y - cy) / factor};
  });
}

int max_abs_diff(const Image& a, const Image& b) {
  REQUIRE(a.data().size() == b.data().size());
  int m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Image from_rows(std::vector<std::vector<int>> rows) {
  Image img(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(x, y, 0) = static_cast<std::uint8_t>(rows[y][x]);
  return img;
}

}  // namespace

TEST_CASE("reflect_index follows the edge-inclusive mirror") {
  CHECK(reflect_index(-1, 5) == 0);
  CHECK(reflect_index(-2, 5) == 1);
  CHECK(reflect_index(5, 5) == 4);
  CHECK(reflect_index(6, 5) == 3);
  CHECK(reflect_index(10, 5) == 0);
  CHECK(reflect_index(-11, 5) == 0);
  for (int n = 1; n <= 7; ++n)
    for (long long i = -40; i <= 40; ++i) REQUIRE(reflect_index(i, n) == mirror(i, n));
}

TEST_CASE("flip") {
  const Image img = from_rows({{1, 2}, {3, 4}});
  CHECK(flip(img, FlipAxis::Horizontal) == from_rows({{2, 1}, {4, 3}}));
  CHECK(flip(img, FlipAxis::Vertical) == from_rows({{3, 4}, {1, 2}}));
  const Image r = test::random_image(13, 7, 1);
  CHECK(flip(flip(r, FlipAxis::Horizontal), FlipAxis::Horizontal) == r);
  CHECK(flip(flip(r, FlipAxis::Vertical), FlipAxis::Vertical) == r);
  const Image row = test::random_image(9, 1, 2);
  CHECK(flip(row, FlipAxis::Vertical) == row);
}

TEST_CASE("rotate") {
  const Image r = test::random_image(16, 16, 3);
  CHECK(rotate(r, 0.0) == r);

  const Image sq = from_rows({{10, 20}, {30, 40}});
  CHECK(rotate(sq, 180.0) == flip(flip(sq, FlipAxis::Horizontal), FlipAxis::Vertical));

  CHECK(max_abs_diff(rotate(r, 40.0), reference_rotate(r, 40.0)) <= 1);
  CHECK(max_abs_diff(rotate(r, -27.5), reference_rotate(r, -27.5)) <= 1);
  const Image wide = test::random_image(20, 11, 4);
  CHECK(max_abs_diff(rotate(wide, 13.0), reference_rotate(wide, 13.0)) <= 1);
}

TEST_CASE("rotation is counter-clockwise as displayed") {
  Image img(5, 5, 1);
  img.at(4, 2, 0) = 200;  // right of centre
  const Image out = rotate(img, 90.0);
  CHECK(out.at(2, 0, 0) == 200);  // now above centre
  CHECK(out.at(4, 2, 0) == 0);
}

TEST_CASE("translate") {
  const Image r = test::random_image(12, 9, 5);
  CHECK(translate(r, 0.0, 0.0) == r);
  const Image row = from_rows({{1, 2, 3, 4}});
  CHECK(translate(row, 0.25, 0.0) == from_rows({{1, 1, 2, 3}}));
  CHECK(translate(row, -0.25, 0.0) == from_rows({{2, 3, 4, 4}}));
  CHECK(translate(r, 1.0, 0.0) == flip(r, FlipAxis::Horizontal));
  CHECK(translate(r, 0.0, 1.0) == flip(r, FlipAxis::Vertical));
}

TEST_CASE("zoom") {
  const Image r = test::random_image(16, 16, 6);
  CHECK(zoom(r, 1.0) == r);
  Image flat(10, 8, 3);
  for (auto& v : flat.data()) v = 77;
  for (double f : {0.7, 0.8, 1.2, 1.9}) CHECK(zoom(flat, f) == flat);
  CHECK(max_abs_diff(zoom(r, 1.2), reference_zoom(r, 1.2)) <= 1);
  CHECK(max_abs_diff(zoom(r, 0.8), reference_zoom(r, 0.8)) <= 1);
  CHECK_THROWS_AS(zoom(r, 0.0), Error);
}

TEST_CASE("zoom above 1 magnifies towards the centre") {
  Image img(9, 9, 1);
  img.at(6, 4, 0) = 255;  // two pixels right of centre
  const Image out = zoom(img, 2.0);
  CHECK(out.at(8, 4, 0) == 255);  // pushed out to four pixels right
}

TEST_CASE("random_augment determinism and ranges") {
  const Image r = test::random_image(16, 16, 7);
  const AugmentParams params;
  CHECK(random_augment(r, params, 42) == random_augment(r, params, 42));

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const AugmentDraw d = draw_augment(params, rng);
    REQUIRE(d.angle >= -40.0);
    REQUIRE(d.angle <= 40.0);
    REQUIRE(d.zoom >= 0.8);
    REQUIRE(d.zoom <= 1.2);
    REQUIRE(std::abs(d.dx) <= 0.2);
    REQUIRE(std::abs(d.dy) <= 0.2);
  }

  AugmentParams zero;
  zero.zoom_range = zero.rotation_range = zero.width_shift = zero.height_shift = 0.0;
  zero.horizontal_flip = zero.vertical_flip = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(random_augment(r, zero, seed) == r);
}

TEST_CASE("draw order consumes six uniforms") {
  AugmentParams p;
  p.horizontal_flip = false;
  Rng a(9);
  const AugmentDraw d = draw_augment(p, a);
  CHECK_FALSE(d.hflip);
  Rng b(9);
  const double u0 = b.uniform();
  const double u1 = b.uniform();
  CHECK(d.zoom == doctest::Approx(0.8 + 0.4 * u0).epsilon(1e-15));
  CHECK(d.angle == doctest::Approx(-40.0 + 80.0 * u1).epsilon(1e-15));
  for (int i = 0; i < 4; ++i) b.uniform();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("apply_augment composes zoom, rotate, translate, flips in order") {
  const Image r = test::random_image(16, 12, 8);
  const AugmentDraw d{1.1, 17.0, 0.1, -0.05, true, true};
  const Image manual = flip(flip(translate(rotate(zoom(r, 1.1), 17.0), 0.1, -0.05),
                                 FlipAxis::Horizontal),
                            FlipAxis::Vertical);
  CHECK(apply_augment(r, d) == manual);
}

TEST_CASE("fill never introduces empty pixels") {
  const Image r = test::random_image(16, 16, 10, 1, 255);
  const AugmentParams params;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Image out = random_augment(r, params, seed);
    CHECK(out.width() == 16);
    CHECK(out.height() == 16);
    CHECK(*std::min_element(out.data().begin(), out.data().end()) >= 1);
  }
}

TEST_CASE("params validation and JSON") {
  AugmentParams p;
  p.zoom_range = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = AugmentParams{};
  p.rotation_range = 181;
  CHECK_THROWS_AS(p.validate(), Error);

  AugmentParams q;
  q.rotation_range = 15;
  q.vertical_flip = false;
  const AugmentParams back = augment_params_from_json(augment_params_to_json(q));
  CHECK(back.rotation_range == 15);
  CHECK_FALSE(back.vertical_flip);
  CHECK(nlohmann::json::parse(augment_params_to_json(q))["rng"] == "mt19937_64");
  CHECK_THROWS_AS(augment_params_from_json(R"({"fill_mode": "nearest"})"), Error);
}
