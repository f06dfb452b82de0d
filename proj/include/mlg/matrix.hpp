#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mlg {

// Dense row-major matrix used at module boundaries.
template <typename T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, T(0)) {}
  Matrix(int r, int c, std::vector<T> v) : rows(r), cols(c), data(std::move(v)) {}

  T& operator()(int r, int c) { return data[std::size_t(r) * cols + c]; }
  T operator()(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  std::span<T> row(int r) { return {data.data() + std::size_t(r) * cols, std::size_t(cols)}; }
  std::span<const T> row(int r) const { return {data.data() + std::size_t(r) * cols, std::size_t(cols)}; }
  bool operator==(const Matrix&) const = default;
};

}  // namespace mlg
