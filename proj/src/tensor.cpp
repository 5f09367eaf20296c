#include "usdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace usdiff {

std::size_t element_count(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> dims, float fill) : dims_(std::move(dims)) {
  if (dims_.size() > kMaxRank) throw std::invalid_argument("Tensor: rank above 4");
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (dims_.size() > kMaxRank) throw std::invalid_argument("Tensor: rank above 4");
  if (data_.size() != element_count(dims_)) {
    throw std::invalid_argument("Tensor: " + std::to_string(data_.size()) +
                                " values for shape " + shape_string());
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

}  // namespace usdiff
