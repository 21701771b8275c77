#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace imle {

// Row-major array of doubles with an explicit shape.
// Invariant: product(shape) == data.size().
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  static DenseArray Matrix(std::size_t rows, std::size_t cols,
                           std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 element access.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  // Row r of a rank-2 array.
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  DenseArray Reshaped(std::vector<std::size_t> shape) const;
  void Fill(double v);
  bool AllFinite() const;

  bool operator==(const DenseArray&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t ShapeProduct(const std::vector<std::size_t>& shape);
std::string ShapeString(const std::vector<std::size_t>& shape);

}  // namespace imle
