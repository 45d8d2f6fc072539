#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace twin {

// Dense row-major matrix indexed as (row, col). Rows follow the weight-decay
// axis and columns the learning-rate axis everywhere in this library.
template <typename T>
class Matrix2D {
 public:
  using value_type = T;
  using reference = typename std::vector<T>::reference;
  using const_reference = typename std::vector<T>::const_reference;

  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix2D: data size " + std::to_string(data_.size()) +
                                  " does not match shape " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(std::size_t r, std::size_t c) const { return rows_ == r && cols_ == c; }
  template <typename U>
  bool same_shape(const Matrix2D<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  reference operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const_reference operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  reference operator[](std::size_t flat) { return data_[flat]; }
  const_reference operator[](std::size_t flat) const { return data_[flat]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const Matrix2D&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix2D<double>;
using Mask = Matrix2D<bool>;
using IntMatrix = Matrix2D<int>;

}  // namespace twin
