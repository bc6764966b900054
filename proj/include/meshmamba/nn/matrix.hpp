#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace meshmamba::nn {

// Dense row-major matrix of doubles; the value type flowing through the tape.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstEigenMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  EigenMap eigen() { return EigenMap(data.data(), rows, cols); }
  ConstEigenMap eigen() const { return ConstEigenMap(data.data(), rows, cols); }
};

// Constant CSR matrix (adjacency means, interpolation weights, samplers).
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_index;
  std::vector<double> values;

  void append_row(const std::vector<std::pair<int, double>>& entries) {
    for (const auto& [c, v] : entries) {
      col_index.push_back(c);
      values.push_back(v);
    }
    row_ptr.push_back(static_cast<int>(col_index.size()));
    ++rows;
  }
  std::size_t nonzeros() const { return values.size(); }
};

}  // namespace meshmamba::nn
