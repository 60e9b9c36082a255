/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmfnet {

struct Entry {
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed-row matrix kept in canonical form: columns sorted within a row,
// no duplicate positions, no stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  // Throws ConfigError on out-of-range or duplicate positions. Zero values
  // are dropped.
  static SparseMatrix from_entries(std::size_t rows, std::size_t cols,
                                   std::vector<Entry> entries);
  static SparseMatrix identity(std::size_t n, double scale = 1.0);
  static SparseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double at(std::size_t r, std::size_t c) const;
  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::vector<Entry> entries() const;

  // Copy with (r, c) set to v; v == 0 removes the entry.
  SparseMatrix with_entry(std::size_t r, std::size_t c, double v) const;

  SparseMatrix abs() const;
  SparseMatrix transpose() const;
  SparseMatrix scaled(double s) const;
  SparseMatrix off_diagonal() const;
  SparseMatrix squared_entries() const;
  std::vector<double> diagonal_values() const;
  bool is_diagonal() const;

  // |A|_inf: largest absolute row sum.
  double max_abs_row_sum() const;
  // |A|_d: largest absolute diagonal entry.
  double max_abs_diagonal() const;

  // y[i*w + p] += sum_j A_ij x[j*w + p] for p < w (row-major n x w blocks).
  void multiply_add(const double* x, double* y, std::size_t w) const;
  // y[i*w + p] = sum_j A_ij x[j*w + p]
  void multiply(const double* x, double* y, std::size_t w) const;

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

SparseMatrix operator+(const SparseMatrix& a, const SparseMatrix& b);
SparseMatrix operator*(const SparseMatrix& a, const SparseMatrix& b);

// Diagonal of P Q P' without forming the product.
std::vector<double> sandwich_diagonal(const SparseMatrix& p, const SparseMatrix& q);

// Diagonal of P diag(d) P'.
std::vector<double> weighted_gram_diagonal(const SparseMatrix& p,
                                           std::span<const double> d);

double max_abs(std::span<const double> v);

}  // namespace pmfnet
