#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace usdiff {

/// Dense float tensor with up to four extents (batch, channel, height, width),
/// row-major.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);
  Tensor(std::initializer_list<std::size_t> dims, float fill = 0.0f)
      : Tensor(std::vector<std::size_t>(dims), fill) {}

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;
  void fill(float v);

  std::string shape_string() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

std::size_t element_count(const std::vector<std::size_t>& dims);

}  // namespace usdiff
