#pragma once

#include <cstddef>
#include <vector>

namespace cofa {

/// Dense n x n matrix, row-major. Used for the pairwise level statistics.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  /// Writes both (i, j) and (j, i).
  void set_symmetric(std::size_t i, std::size_t j, T value) {
    (*this)(i, j) = value;
    (*this)(j, i) = value;
  }

  const std::vector<T>& data() const noexcept { return data_; }
  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

}  // namespace cofa
