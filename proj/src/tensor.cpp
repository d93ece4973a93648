#include "loadcast/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "loadcast/error.hpp"

namespace loadcast {

namespace {
std::size_t volume(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(volume(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != volume(shape_))
    throw Error(ErrorCode::ShapeMismatch,
                "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string());
}

MatrixMap Tensor::matrix() {
  const auto rows = shape_.size() >= 2 ? static_cast<Eigen::Index>(shape_[0]) : 1;
  const auto cols = shape_.size() >= 2 ? static_cast<Eigen::Index>(data_.size() / shape_[0])
                                       : static_cast<Eigen::Index>(data_.size());
  return MatrixMap(data_.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix() const {
  const auto rows = shape_.size() >= 2 ? static_cast<Eigen::Index>(shape_[0]) : 1;
  const auto cols = shape_.size() >= 2 ? static_cast<Eigen::Index>(data_.size() / shape_[0])
                                       : static_cast<Eigen::Index>(data_.size());
  return ConstMatrixMap(data_.data(), rows, cols);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

}  // namespace loadcast
