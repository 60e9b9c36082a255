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

#include "pmfnet/families.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmfnet/error.hpp"

namespace pmfnet {

namespace {

LevySpec brownian(double var) { return LevySpec{var, 0.0, {}}; }

SparseMatrix mean_coupling(std::size_t N, double w) {
  std::vector<Entry> e;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (i != j) e.push_back({i, j, w});
    }
  }
  return SparseMatrix::from_entries(N, N, e);
}

// +-1 from a fixed integer hash so the pattern does not depend on any RNG.
double sign_of(std::size_t i, std::size_t k) {
  std::uint64_t h = (static_cast<std::uint64_t>(i) << 32) ^ k;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return (h & 1) ? 1.0 : -1.0;
}

}  // namespace

ModelInstance mckean(std::size_t N, double x0_mean, double x0_var) {
  if (N < 2) throw ConfigError("mckean needs N >= 2");
  ModelInstance mi;
  mi.coeffs = build_coefficients(
      N, N,
      {{Role::aC, SparseMatrix::identity(N, -1.0)},
       {Role::aP, mean_coupling(N, 1.0 / static_cast<double>(N - 1))},
       {Role::rC, SparseMatrix::identity(N)}});
  mi.noise = NoiseModel::make(std::vector<LevySpec>(N), {}, std::vector<LevySpec>(N, brownian(1.0)),
                              std::vector<DriftDensity>(N), std::vector<double>(N, x0_mean),
                              std::vector<double>(N, x0_var), {});
  mi.layout = {0, N, 0};
  mi.R_A = static_cast<double>(N - 1);
  return mi;
}

ModelInstance classex(std::size_t N) {
  if (N < 2) throw ConfigError("classex needs N >= 2");
  const double inv = 1.0 / static_cast<double>(N);
  ModelInstance mi;
  mi.coeffs = build_coefficients(N, N,
                                 {{Role::aC, SparseMatrix::identity(N, -1.0)},
                                  {Role::aP, mean_coupling(N, inv)},
                                  {Role::sC, SparseMatrix::identity(N, 0.2)},
                                  {Role::sP, mean_coupling(N, 0.2 * inv)},
                                  {Role::fC, SparseMatrix::identity(N)},
                                  {Role::rC, SparseMatrix::identity(N)}});
  mi.noise = NoiseModel::make(std::vector<LevySpec>(N, brownian(0.5)), {},
                              std::vector<LevySpec>(N, brownian(1.0)),
                              std::vector<DriftDensity>(N, DriftDensity::constant(0.1, 0.1)),
                              std::vector<double>(N, 1.0), std::vector<double>(N, 0.5), {});
  mi.layout = {0, N, 0};
  mi.R_A = mi.R_Sigma = static_cast<double>(N);
  return mi;
}

ModelInstance sparse_core_periphery(std::size_t N) {
  constexpr std::size_t N0 = 2, N00 = 1;
  if (N < 8) throw ConfigError("sparse_core_periphery needs N >= 8");
  const std::size_t n = N0 + N, m = N00 + n;
  const double inv = 1.0 / static_cast<double>(N);
  std::vector<Entry> aC, aP, sC, sP, fC, fP, rC, rP;
  aC.push_back({0, 1, 0.5});
  aC.push_back({1, 0, 0.3});
  for (std::size_t i = 0; i < n; ++i) {
    aC.push_back({i, i, -1.0});
    sC.push_back({i, i, 0.2});
    if (i >= N0) {
      for (std::size_t k = 0; k < N0; ++k) aC.push_back({i, k, 0.5});
    }
    for (std::size_t s = 0; s < 3; ++s) aP.push_back({i, N0 + (i + 1 + s) % N, inv});
    for (std::size_t s = 0; s < 2; ++s) sP.push_back({i, N0 + (i + 1 + s) % N, 0.5 * inv});
    fC.push_back({i, 0, 0.5});
    fC.push_back({i, N00 + i, 1.0});
    rC.push_back({i, 0, 0.3});
    rC.push_back({i, N00 + i, 1.0});
    fP.push_back({i, N00 + (i + 1) % n, inv});
    rP.push_back({i, N00 + (i + 1) % n, inv});
  }
  ModelInstance mi;
  mi.coeffs = build_coefficients(n, m,
                                 {{Role::aC, SparseMatrix::from_entries(n, n, aC)},
                                  {Role::aP, SparseMatrix::from_entries(n, n, aP)},
                                  {Role::sC, SparseMatrix::from_entries(n, n, sC)},
                                  {Role::sP, SparseMatrix::from_entries(n, n, sP)},
                                  {Role::fC, SparseMatrix::from_entries(n, m, fC)},
                                  {Role::fP, SparseMatrix::from_entries(n, m, fP)},
                                  {Role::rC, SparseMatrix::from_entries(n, m, rC)},
                                  {Role::rP, SparseMatrix::from_entries(n, m, rP)}});
  std::vector<Entry> lcorr;
  for (std::size_t i = 0; i + 1 < n; ++i) lcorr.push_back({i, i + 1, 0.5});
  std::vector<DriftDensity> b(m, DriftDensity::constant(0.1, 0.1));
  b[0] = DriftDensity{0.0, 1.0, 2.0 * std::numbers::pi, 0.0, 0.2};
  mi.noise = NoiseModel::make(std::vector<LevySpec>(n, brownian(1.0)), lcorr,
                              std::vector<LevySpec>(m, brownian(1.0)), b, std::vector<double>(n, 1.0),
                              std::vector<double>(n, 0.5), {});
  mi.layout = {N0, N, N00};
  mi.R_A = mi.R_Sigma = static_cast<double>(N);
  return mi;
}

ModelInstance mckean_tail(std::size_t N) {
  if (N < 2) throw ConfigError("mckean_tail needs N >= 2");
  const double inv = 1.0 / static_cast<double>(N);
  std::vector<Entry> rp;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < N; ++k) {
      if (k != i) rp.push_back({i, k, sign_of(i, k) * inv});
    }
  }
  ModelInstance mi;
  mi.coeffs = build_coefficients(
      N, N,
      {{Role::aC, SparseMatrix::identity(N, -1.0)},
       {Role::aP, mean_coupling(N, 1.0 / static_cast<double>(N - 1))},
       {Role::rC, SparseMatrix::identity(N)},
       {Role::rP, SparseMatrix::from_entries(N, N, rp)}});
  mi.noise = NoiseModel::make(std::vector<LevySpec>(N), {}, std::vector<LevySpec>(N, brownian(1.0)),
                              std::vector<DriftDensity>(N), std::vector<double>(N, 0.0),
                              std::vector<double>(N, 0.0), {});
  mi.layout = {0, N, 0};
  mi.R_A = static_cast<double>(N - 1);
  return mi;
}

namespace {

struct Draw {
  std::mt19937_64& rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
};

LevySpec random_levy(Draw& d, double var_lo, double var_hi) {
  LevySpec s;
  s.brownian_var = d.uniform(var_lo, var_hi);
  if (d.coin(0.3)) {
    s.jump_rate = d.uniform(0.5, 2.0);
    const double z = d.uniform(0.1, 0.5);
    const double p = d.uniform(0.2, 0.8);
    s.atoms = {{z, p}, {-d.uniform(0.1, 0.5), 1.0 - p}};
  }
  return s;
}

DriftDensity random_drift(Draw& d, bool white) {
  DriftDensity b;
  b.offset = d.uniform(-0.5, 0.5);
  if (d.coin(0.5)) {
    b.amplitude = d.uniform(0.1, 1.0);
    b.omega = d.uniform(0.5, 8.0);
    b.phase = d.uniform(0.0, 3.0);
  }
  if (white) b.white_var = d.uniform(0.0, 0.3);
  return b;
}

// Disjoint pairs (2k, 2k+1) with |correlation| <= 0.6 keep the matrix PSD.
std::vector<Entry> paired_offdiag(Draw& d, const std::vector<double>& var) {
  std::vector<Entry> out;
  for (std::size_t i = 0; i + 1 < var.size(); i += 2) {
    if (d.coin(0.4)) {
      const double rho = d.uniform(-0.6, 0.6);
      const double v = rho * std::sqrt(var[i] * var[i + 1]);
      if (v != 0.0) out.push_back({i, i + 1, v});
    }
  }
  return out;
}

// Up to k off-diagonal entries per row with total magnitude <= budget.
std::vector<Entry> sparse_rows(Draw& d, std::size_t rows, std::size_t cols, std::size_t k,
                               double budget, bool skip_diagonal) {
  std::vector<Entry> out;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t cnt = d.index(0, k);
    std::vector<std::size_t> used;
    for (std::size_t t = 0; t < cnt; ++t) {
      const std::size_t j = d.index(0, cols - 1);
      if ((skip_diagonal && j == i) || std::find(used.begin(), used.end(), j) != used.end()) continue;
      used.push_back(j);
      const double v = d.uniform(-1.0, 1.0) * budget / static_cast<double>(k);
      if (v != 0.0) out.push_back({i, j, v});
    }
  }
  return out;
}

}  // namespace

ModelInstance random_config(std::mt19937_64& rng, RandomKind kind, std::size_t n_max) {
  if (n_max < 2) throw ConfigError("random_config needs n_max >= 2");
  Draw d{rng};
  const std::size_t n = d.index(2, n_max);
  const bool diag = kind == RandomKind::DiagonalCore;
  const std::size_t n00 = diag ? 0 : d.index(0, 2);
  const std::size_t m = n00 + n;
  const bool periphery = kind != RandomKind::ZeroPeriphery;

  std::vector<Entry> aC, sC, fC, rC;
  for (std::size_t i = 0; i < n; ++i) {
    aC.push_back({i, i, d.uniform(-1.0, -0.1)});
    const double s = d.uniform(0.0, 0.3);
    if (s != 0.0) sC.push_back({i, i, s});
    fC.push_back({i, diag ? i : n00 + i, d.uniform(0.2, 1.0)});
    rC.push_back({i, diag ? i : n00 + i, d.uniform(0.2, 1.0)});
    if (!diag) {
      for (std::size_t j = 0; j < n00; ++j) {
        if (d.coin(0.5)) fC.push_back({i, j, d.uniform(-0.5, 0.5)});
        if (d.coin(0.5)) rC.push_back({i, j, d.uniform(-0.5, 0.5)});
      }
    }
  }
  if (!diag) {
    for (auto e : sparse_rows(d, n, n, 2, 0.3, true)) aC.push_back(e);
  }
  std::vector<std::pair<Role, SparseMatrix>> blocks = {
      {Role::aC, SparseMatrix::from_entries(n, n, aC)},
      {Role::sC, SparseMatrix::from_entries(n, n, sC)},
      {Role::fC, SparseMatrix::from_entries(n, m, fC)},
      {Role::rC, SparseMatrix::from_entries(n, m, rC)}};
  if (periphery) {
    blocks.emplace_back(Role::aP, SparseMatrix::from_entries(n, n, sparse_rows(d, n, n, 4, 0.6, true)));
    blocks.emplace_back(Role::sP, SparseMatrix::from_entries(n, n, sparse_rows(d, n, n, 3, 0.3, true)));
    // periphery loadings avoid the particle's own idiosyncratic column
    auto fp = sparse_rows(d, n, m, 3, 0.6, false);
    auto rp = sparse_rows(d, n, m, 3, 0.6, false);
    auto own = [&](const Entry& e) { return e.col == (diag ? e.row : n00 + e.row); };
    std::erase_if(fp, own);
    std::erase_if(rp, own);
    blocks.emplace_back(Role::fP, SparseMatrix::from_entries(n, m, fp));
    blocks.emplace_back(Role::rP, SparseMatrix::from_entries(n, m, rp));
  }

  std::vector<LevySpec> L(n), M(m);
  std::vector<double> lvar(n), x0_mean(n), x0_var(n);
  for (std::size_t i = 0; i < n; ++i) {
    L[i] = random_levy(d, 0.05, 0.5);
    lvar[i] = L[i].brownian_var;  // jumps are drawn independently
    x0_mean[i] = d.uniform(-1.0, 1.0);
    x0_var[i] = d.uniform(0.05, 1.0);
  }
  for (auto& s : M) s = random_levy(d, 0.1, 1.0);
  std::vector<DriftDensity> b(m);
  for (auto& x : b) x = random_drift(d, true);
  std::vector<Entry> l_off, x_off;
  if (!diag) {
    l_off = paired_offdiag(d, lvar);
    x_off = paired_offdiag(d, x0_var);
  }
  ModelInstance mi;
  mi.coeffs = build_coefficients(n, m, std::move(blocks));
  mi.noise = NoiseModel::make(std::move(L), l_off, std::move(M), std::move(b), std::move(x0_mean),
                              x0_var, x_off);
  mi.layout = {0, n, n00};
  return mi;
}

}  // namespace pmfnet
