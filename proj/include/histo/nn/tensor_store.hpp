#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "histo/nn/model.hpp"
#include "histo/nn/tensor.hpp"

namespace histo::nn {

/// Weight container layout, all integers little-endian, no padding:
///
///   "EFFW"            4 bytes magic
///   version           u32 (= 1)
///   entry count       u32
///   per entry:
///     name length     u16
///     name            UTF-8 bytes
///     rank            u8
///     dims            rank × u32
///     values          product(dims) × IEEE-754 float32, row-major
inline constexpr std::uint32_t kTensorStoreVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> encode_tensor_store(const NamedTensors& entries);
NamedTensors decode_tensor_store(std::span<const std::uint8_t> bytes);

void save_tensors(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_tensors(const std::filesystem::path& path);

/// Reserved entry holding the model's graph description as UTF-8 bytes, one
/// byte per float element, so a weight file is self-describing.
inline constexpr const char* kGraphEntry = "__graph__";

void save_weights(const Model& model, const std::filesystem::path& path);

/// Rebuilds graph and weights from a file written by save_weights.
Model load_model(const std::filesystem::path& path);

/// Replaces `model`'s weights; names and shapes must match exactly.
void load_weights(const std::filesystem::path& path, Model& model);

}  // namespace histo::nn
