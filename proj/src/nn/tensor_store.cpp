#include "histo/nn/tensor_store.hpp"

#include <bit>
#include <cstring>
#include <set>

#include "histo/error.hpp"
#include "histo/image_io.hpp"

namespace histo::nn {

namespace {

constexpr std::uint8_t kMagic[4] = {'E', 'F', 'F', 'W'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::TruncatedFile, "need " + std::to_string(n) + " bytes at offset " +
                                                std::to_string(pos_));
    }
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor_store(const NamedTensors& entries) {
  std::set<std::string> seen;
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kTensorStoreVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (!seen.insert(name).second) throw Error(ErrorCode::NameCollision, name);
    if (name.size() > UINT16_MAX) throw Error(ErrorCode::InvalidArgument, "tensor name too long");
    if (t.rank() > UINT8_MAX) throw Error(ErrorCode::InvalidArgument, "tensor rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.f32(v);
  }
  return w.take();
}

NamedTensors decode_tensor_store(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a weight file");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kTensorStoreVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  NamedTensors out;
  std::set<std::string> seen;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t len = r.u16();
    std::string name = r.str(len);
    if (!seen.insert(name).second) throw Error(ErrorCode::NameCollision, name);
    const int rank = r.u8();
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      const std::uint32_t dim = r.u32();
      if (dim > static_cast<std::uint32_t>(INT32_MAX)) {
        throw Error(ErrorCode::TruncatedFile, "dimension out of range in " + name);
      }
      d = static_cast<int>(dim);
      n *= dim;
      if (dim != 0 && n > bytes.size()) {
        throw Error(ErrorCode::TruncatedFile, name + " declares more values than the file holds");
      }
    }
    r.need(n * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw Error(ErrorCode::TruncatedFile, "trailing bytes after last entry");
  return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& entries) {
  write_file_atomic(path, encode_tensor_store(entries));
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  return decode_tensor_store(read_file_bytes(path));
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  NamedTensors entries;
  const std::string graph = model.graph().dump();
  std::vector<float> graph_bytes(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    graph_bytes[i] = static_cast<float>(static_cast<unsigned char>(graph[i]));
  }
  const int graph_len = static_cast<int>(graph_bytes.size());
  entries.emplace_back(kGraphEntry, Tensor({graph_len}, std::move(graph_bytes)));
  for (const auto& [name, t] : model.params()) {
    if (name == kGraphEntry) throw Error(ErrorCode::NameCollision, name);
    entries.emplace_back(name, t);
  }
  save_tensors(path, entries);
}

Model load_model(const std::filesystem::path& path) {
  ParamMap params;
  std::string graph;
  bool have_graph = false;
  for (auto& [name, t] : load_tensors(path)) {
    if (name == kGraphEntry) {
      graph.reserve(t.size());
      for (float v : t.values()) graph.push_back(static_cast<char>(static_cast<unsigned char>(v)));
      have_graph = true;
    } else {
      params.emplace(std::move(name), std::move(t));
    }
  }
  if (!have_graph) {
    throw Error(ErrorCode::UnsupportedVersion, path.string() + " has no graph description");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(graph);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnsupportedVersion, std::string("corrupt graph entry: ") + e.what());
  }
  return Model::from_graph(j, std::move(params));
}

void load_weights(const std::filesystem::path& path, Model& model) {
  ParamMap loaded;
  for (auto& [name, t] : load_tensors(path)) {
    if (name != kGraphEntry) loaded.emplace(std::move(name), std::move(t));
  }
  if (loaded.size() != model.params().size()) {
    throw Error(ErrorCode::ShapeMismatch, "weight file has " + std::to_string(loaded.size()) +
                                              " tensors, model has " +
                                              std::to_string(model.params().size()));
  }
  for (const auto& [name, t] : model.params()) {
    auto it = loaded.find(name);
    if (it == loaded.end() || it->second.shape() != t.shape()) {
      throw Error(ErrorCode::ShapeMismatch, "weight file does not match parameter " + name);
    }
  }
  model.params() = std::move(loaded);
}

}  // namespace histo::nn
