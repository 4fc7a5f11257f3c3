#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace histo::nn {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense float32 tensor, row-major with the last dimension innermost.
/// Image batches are (batch, channels, height, width).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Shapes equal and every element has the same bit pattern.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Named tensors, iterated in name order.
using ParamMap = std::map<std::string, Tensor>;

}  // namespace histo::nn
