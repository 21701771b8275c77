#include "imle/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "imle/errors.hpp"

namespace imle {

std::size_t ShapeProduct(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeString(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(ShapeProduct(shape_), fill) {}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (ShapeProduct(shape_) != data_.size()) {
    throw DimensionError("DenseArray: shape " + ShapeString(shape_) +
                         " does not match " + std::to_string(data_.size()) +
                         " values");
  }
}

DenseArray DenseArray::Matrix(std::size_t rows, std::size_t cols,
                              std::initializer_list<double> values) {
  return DenseArray({rows, cols}, std::vector<double>(values));
}

std::span<double> DenseArray::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * shape_[1], shape_[1]);
}

std::span<const double> DenseArray::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * shape_[1], shape_[1]);
}

DenseArray DenseArray::Reshaped(std::vector<std::size_t> shape) const {
  return DenseArray(std::move(shape), data_);
}

void DenseArray::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseArray::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace imle
