// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace maskrate {

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T (or +=)
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
// each row of m += bias (1 x cols)
void add_row_bias(Matrix& m, const Matrix& bias);
// out(0, j) += sum_i m(i, j)
void col_sum_acc(const Matrix& m, Matrix& out);

}  // namespace maskrate
