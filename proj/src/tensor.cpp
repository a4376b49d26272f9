// SPDX-License-Identifier: Apache-2.0
#include "maskrate/tensor.hpp"

#include <cassert>

namespace maskrate {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols == b.rows);
  out = Matrix(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ar = a.row(i);
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    const double* br = b.row(i);
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      double* o = out.row(p);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  assert(a.cols == b.cols);
  if (!accumulate) out = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* o = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += ar[p] * br[p];
      o[j] += s;
    }
  }
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias.data[j];
  }
}

void col_sum_acc(const Matrix& m, Matrix& out) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) out.data[j] += r[j];
  }
}

}  // namespace maskrate
