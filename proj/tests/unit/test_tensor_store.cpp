#include <doctest.h>

#include <cstring>

#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/nn/tensor_store.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace histo;
using namespace histo::nn;

namespace {

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor_store(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode succeeded");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("one-tensor golden file") {
  const NamedTensors entries{{"fc0.bias", Tensor({2}, std::vector<float>{1.0f, 2.0f})}};
  const auto bytes = encode_tensor_store(entries);
  CHECK(bytes.size() == 35);
  CHECK(bytes == test::golden_weight_bytes());
  const auto back = decode_tensor_store(test::golden_weight_bytes());
  REQUIRE(back.size() == 1);
  CHECK(back[0].first == "fc0.bias");
  CHECK(bit_equal(back[0].second, entries[0].second));

  test::TempDir dir;
  save_tensors(dir / "g.effw", entries);
  CHECK(read_file_bytes(dir / "g.effw") == test::golden_weight_bytes());
}

TEST_CASE("decoder errors") {
  auto b = test::golden_weight_bytes();
  b[0] = 'X';
  CHECK(decode_error(b) == ErrorCode::BadMagic);
  b = test::golden_weight_bytes();
  b[4] = 2;
  CHECK(decode_error(b) == ErrorCode::UnsupportedVersion);
  b = test::golden_weight_bytes();
  for (std::size_t cut = 0; cut < b.size(); ++cut) {
    std::vector<std::uint8_t> part(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut));
    const ErrorCode code = decode_error(part);
    CHECK((code == ErrorCode::TruncatedFile || (cut < 4 && code == ErrorCode::BadMagic)));
  }
  b = test::golden_weight_bytes();
  b.push_back(0);
  CHECK(decode_error(b) == ErrorCode::TruncatedFile);
  b = test::golden_weight_bytes();
  b[20] = 0xFF;  // dimension far larger than the payload
  b[21] = 0xFF;
  b[22] = 0xFF;
  b[23] = 0x7F;
  CHECK(decode_error(b) == ErrorCode::TruncatedFile);

  const NamedTensors dup{{"a", Tensor({1})}, {"a", Tensor({1})}};
  CHECK_THROWS_AS(encode_tensor_store(dup), Error);
  auto twice = encode_tensor_store({{"a", Tensor({1})}, {"b", Tensor({1})}});
  twice[26] = 'a';  // rename the second entry to collide
  CHECK(decode_error(twice) == ErrorCode::NameCollision);
}

TEST_CASE("special values and scalars survive bit-exactly") {
  Tensor t({2, 3});
  const float specials[6] = {-0.0f, 1e-45f, 3.4028235e38f, -1.5f, 0.1f, 7.0f};
  std::memcpy(t.data(), specials, sizeof specials);
  const auto back = decode_tensor_store(encode_tensor_store({{"t", t}, {"s", Tensor({}, 2.5f)}}));
  CHECK(bit_equal(back[0].second, t));
  CHECK(back[1].second.rank() == 0);
  CHECK(back[1].second[0] == 2.5f);
}

TEST_CASE("weights round trip on random models") {
  test::TempDir dir;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const int res = 8 + 4 * static_cast<int>(rng.below(4));
    const int width = 2 + static_cast<int>(rng.below(6));
    Model m = build_compact_model(res, width, 4, rng.next_u64());
    for (auto& [name, t] : m.params())
      for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-3, 3));
    const auto path = dir / ("m" + std::to_string(i) + ".effw");
    save_weights(m, path);
    const Model back = load_model(path);
    REQUIRE(back.params().size() == m.params().size());
    for (const auto& [name, t] : m.params()) REQUIRE(bit_equal(t, back.params().at(name)));
    CHECK(back.graph() == m.graph());

    Model target = build_compact_model(res, width, 4, 0);
    load_weights(path, target);
    for (const auto& [name, t] : m.params()) REQUIRE(bit_equal(t, target.params().at(name)));
  }
}

TEST_CASE("load_weights requires matching names and shapes") {
  test::TempDir dir;
  const Model m = build_compact_model(16, 4, 4, 1);
  save_weights(m, dir / "m.effw");
  Model wider = build_compact_model(16, 8, 4, 1);
  CHECK_THROWS_AS(load_weights(dir / "m.effw", wider), Error);
  save_tensors(dir / "raw.effw", {{"x", Tensor({1})}});
  CHECK_THROWS_AS(load_model(dir / "raw.effw"), Error);
}
