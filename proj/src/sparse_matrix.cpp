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

#include "pmfnet/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmfnet/error.hpp"

namespace pmfnet {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_entries(std::size_t rows, std::size_t cols,
                                        std::vector<Entry> entries) {
  for (const auto& e : entries) {
    if (e.row >= rows || e.col >= cols) {
      throw ConfigError("entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                        ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(e.value)) {
      throw ConfigError("non-finite entry at (" + std::to_string(e.row) + "," +
                        std::to_string(e.col) + ")");
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      throw ConfigError("duplicate entry (" + std::to_string(e.row) + "," +
                        std::to_string(e.col) + ")");
    }
    if (e.value == 0.0) continue;
    m.col_idx_.push_back(e.col);
    m.values_.push_back(e.value);
    ++m.row_ptr_[e.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n, double scale) {
  std::vector<double> d(n, scale);
  return diagonal(d);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
  std::vector<Entry> e;
  e.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) e.push_back({i, i, d[i]});
  return from_entries(d.size(), d.size(), std::move(e));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) return 0.0;
  auto cs = row_cols(r);
  auto it = std::lower_bound(cs.begin(), cs.end(), c);
  if (it == cs.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cs.begin())];
}

std::vector<Entry> SparseMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.push_back({r, col_idx_[k], values_[k]});
    }
  }
  return out;
}

SparseMatrix SparseMatrix::with_entry(std::size_t r, std::size_t c, double v) const {
  auto e = entries();
  std::erase_if(e, [&](const Entry& x) { return x.row == r && x.col == c; });
  e.push_back({r, c, v});
  return from_entries(rows_, cols_, std::move(e));
}

SparseMatrix SparseMatrix::abs() const {
  SparseMatrix m = *this;
  for (auto& v : m.values_) v = std::fabs(v);
  return m;
}

SparseMatrix SparseMatrix::squared_entries() const {
  SparseMatrix m = *this;
  for (auto& v : m.values_) v = v * v;
  return m;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  for (auto c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r) t.row_ptr_[r + 1] += t.row_ptr_[r];
  std::vector<std::size_t> fill(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      auto pos = fill[col_idx_[k]]++;
      t.col_idx_[pos] = r;
      t.values_[pos] = values_[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::scaled(double s) const {
  auto e = entries();
  for (auto& x : e) x.value *= s;
  return from_entries(rows_, cols_, std::move(e));
}

SparseMatrix SparseMatrix::off_diagonal() const {
  auto e = entries();
  std::erase_if(e, [](const Entry& x) { return x.row == x.col; });
  return from_entries(rows_, cols_, std::move(e));
}

std::vector<double> SparseMatrix::diagonal_values() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
  return d;
}

bool SparseMatrix::is_diagonal() const {
  for (std::size_t r = 0; r < rows_; ++r) {
    for (auto c : row_cols(r)) {
      if (c != r) return false;
    }
  }
  return true;
}

double SparseMatrix::max_abs_row_sum() const {
  double best = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (auto v : row_values(r)) s += std::fabs(v);
    best = std::max(best, s);
  }
  return best;
}

double SparseMatrix::max_abs_diagonal() const {
  double best = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) best = std::max(best, std::fabs(at(i, i)));
  return best;
}

namespace {

template <std::size_t W>
void row_kernel_fixed(const std::size_t* cols, const double* vals, std::size_t len,
                      const double* x, double* yi) {
  double acc[W];
  for (std::size_t p = 0; p < W; ++p) acc[p] = yi[p];
  for (std::size_t k = 0; k < len; ++k) {
    const double a = vals[k];
    const double* xj = x + cols[k] * W;
    for (std::size_t p = 0; p < W; ++p) acc[p] += a * xj[p];
  }
  for (std::size_t p = 0; p < W; ++p) yi[p] = acc[p];
}

}  // namespace

void SparseMatrix::multiply_add(const double* x, double* y, std::size_t w) const {
  for (std::size_t r = 0; r < rows_; ++r) {
    const std::size_t b = row_ptr_[r];
    const std::size_t len = row_ptr_[r + 1] - b;
    if (len == 0) continue;
    double* yi = y + r * w;
    if (w == 32) {
      row_kernel_fixed<32>(col_idx_.data() + b, values_.data() + b, len, x, yi);
    } else if (w == 1) {
      row_kernel_fixed<1>(col_idx_.data() + b, values_.data() + b, len, x, yi);
    } else {
      for (std::size_t k = b; k < b + len; ++k) {
        const double a = values_[k];
        const double* xj = x + col_idx_[k] * w;
        for (std::size_t p = 0; p < w; ++p) yi[p] += a * xj[p];
      }
    }
  }
}

void SparseMatrix::multiply(const double* x, double* y, std::size_t w) const {
  std::fill(y, y + rows_ * w, 0.0);
  multiply_add(x, y, w);
}

bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ &&
         a.col_idx_ == b.col_idx_ && a.values_ == b.values_;
}

SparseMatrix operator+(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw PreconditionError("matrix sum with mismatched dimensions");
  }
  std::vector<Entry> e;
  e.reserve(a.nnz() + b.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ac = a.row_cols(r), bc = b.row_cols(r);
    auto av = a.row_values(r), bv = b.row_values(r);
    std::size_t i = 0, j = 0;
    while (i < ac.size() || j < bc.size()) {
      if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
        e.push_back({r, ac[i], av[i]});
        ++i;
      } else if (i == ac.size() || bc[j] < ac[i]) {
        e.push_back({r, bc[j], bv[j]});
        ++j;
      } else {
        e.push_back({r, ac[i], av[i] + bv[j]});
        ++i;
        ++j;
      }
    }
  }
  return SparseMatrix::from_entries(a.rows(), a.cols(), std::move(e));
}

SparseMatrix operator*(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) throw PreconditionError("matrix product with mismatched dimensions");
  std::vector<Entry> e;
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<char> mark(b.cols(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    touched.clear();
    auto ac = a.row_cols(r);
    auto av = a.row_values(r);
    for (std::size_t k = 0; k < ac.size(); ++k) {
      auto bc = b.row_cols(ac[k]);
      auto bv = b.row_values(ac[k]);
      for (std::size_t l = 0; l < bc.size(); ++l) {
        if (!mark[bc[l]]) {
          mark[bc[l]] = 1;
          touched.push_back(bc[l]);
        }
        acc[bc[l]] += av[k] * bv[l];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto c : touched) {
      e.push_back({r, c, acc[c]});
      acc[c] = 0.0;
      mark[c] = 0;
    }
  }
  return SparseMatrix::from_entries(a.rows(), b.cols(), std::move(e));
}

std::vector<double> sandwich_diagonal(const SparseMatrix& p, const SparseMatrix& q) {
  if (p.cols() != q.rows() || q.rows() != q.cols()) {
    throw PreconditionError("sandwich product with mismatched dimensions");
  }
  std::vector<double> out(p.rows(), 0.0);
  std::vector<double> dense(p.cols(), 0.0);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto pc = p.row_cols(i);
    auto pv = p.row_values(i);
    for (std::size_t k = 0; k < pc.size(); ++k) dense[pc[k]] = pv[k];
    double s = 0.0;
    for (std::size_t k = 0; k < pc.size(); ++k) {
      auto qc = q.row_cols(pc[k]);
      auto qv = q.row_values(pc[k]);
      double inner = 0.0;
      for (std::size_t l = 0; l < qc.size(); ++l) inner += qv[l] * dense[qc[l]];
      s += pv[k] * inner;
    }
    out[i] = s;
    for (auto c : pc) dense[c] = 0.0;
  }
  return out;
}

std::vector<double> weighted_gram_diagonal(const SparseMatrix& p, std::span<const double> d) {
  if (d.size() != p.cols()) throw PreconditionError("weight vector length mismatch");
  std::vector<double> out(p.rows(), 0.0);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto pc = p.row_cols(i);
    auto pv = p.row_values(i);
    double s = 0.0;
    for (std::size_t k = 0; k < pc.size(); ++k) s += pv[k] * pv[k] * d[pc[k]];
    out[i] = s;
  }
  return out;
}

double max_abs(std::span<const double> v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::fabs(x));
  return best;
}

}  // namespace pmfnet
