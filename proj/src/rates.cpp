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

#include "pmfnet/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmfnet/error.hpp"

namespace pmfnet {

namespace {

double sqrt_max_sandwich(const SparseMatrix& p, const SparseMatrix& q) {
  return std::sqrt(max_abs(sandwich_diagonal(p, q)));
}

double sqrt_max_gram(const SparseMatrix& p, std::span<const double> w) {
  return std::sqrt(max_abs(weighted_gram_diagonal(p, w)));
}

// |F diag(w) F'|
SparseMatrix abs_weighted_outer(const SparseMatrix& f, std::span<const double> w) {
  return (f * SparseMatrix::diagonal(w) * f.transpose()).abs();
}

bool within(double lhs, double rhs) { return lhs <= rhs * (1.0 + 1e-12) + 1e-300; }

}  // namespace

RateVector compute_rates(const CoefficientSet& c, const NoiseModel& noise, double T) {
  if (!(T > 0.0)) throw PreconditionError("horizon T must be > 0");
  check_compatible(c, noise);
  const SparseMatrix AP = c.aP.abs();
  const SparseMatrix SP = c.sP.abs();
  const SparseMatrix covX = noise.x0_cov.abs();
  const SparseMatrix covL = noise.L_cov.abs();
  const auto bvar = noise.b_white_variances();
  const auto mvar = noise.M_variances();
  // Cov[b(s), b(t)] is diag(white variance) at s = t and zero elsewhere
  const SparseMatrix Qf = abs_weighted_outer(c.fC, bvar);
  const SparseMatrix Qr = abs_weighted_outer(c.rC, mvar);
  const SparseMatrix ACx = c.aC.abs().off_diagonal();
  RateVector r{};
  r[0] = sqrt_max_sandwich(AP, covX);
  r[1] = sqrt_max_sandwich(SP, covX);
  r[2] = sqrt_max_sandwich(AP, covL);
  r[3] = sqrt_max_sandwich(SP, covL);
  r[4] = sqrt_max_gram(c.fP, bvar);
  r[5] = sqrt_max_gram(c.rP, mvar);
  r[6] = (AP * ACx).max_abs_row_sum();
  r[7] = (SP * ACx).max_abs_row_sum();
  r[8] = sqrt_max_sandwich(AP, Qf);
  r[9] = sqrt_max_sandwich(SP, Qf);
  r[10] = sqrt_max_sandwich(AP, Qr);
  r[11] = sqrt_max_sandwich(SP, Qr);
  return r;
}

Constants compute_constants(const VQuantities& v, double T) {
  if (!(T > 0.0)) throw PreconditionError("horizon T must be > 0");
  Constants k;
  const double sT = std::sqrt(T);
  const double s2 = std::numbers::sqrt2;
  const double s3 = std::sqrt(3.0);
  const double growth = std::pow(sT * v.v_a + 2.0 * v.v_sigma * v.v_L, 2) * T;
  k.K = s2 * std::exp(growth);
  k.E_T = std::exp(v.v_a_d);
  k.V_T = s2 * std::exp(growth) * (v.v_X + v.v_f * v.v_b * T + 2.0 * v.v_rho_M * sT);
  const double E = k.E_T, V = k.V_T, L = v.v_L, S = v.v_sigma;
  k.K_iota = {
      E * T,
      2.0 * L * E * sT,
      2.0 / 3.0 * E * S * V * T * sT,
      s2 * L * E * S * V * T,
      T,
      2.0 * sT,
      0.5 * E * V * T * T,
      2.0 / s3 * L * E * V,
      0.5 * E * T * T,
      2.0 / s3 * L * E * T * sT,
      2.0 / 3.0 * E * T * sT,
      s2 * L * E * T,
  };
  k.overflow = !std::isfinite(k.K) || !std::isfinite(k.E_T) || !std::isfinite(k.V_T);
  for (double x : k.K_iota) k.overflow = k.overflow || !std::isfinite(x);
  if (k.overflow) {
    const double inf = std::numeric_limits<double>::infinity();
    if (!std::isfinite(k.K)) k.K = inf;
    if (!std::isfinite(k.E_T)) k.E_T = inf;
    if (!std::isfinite(k.V_T)) k.V_T = inf;
    for (double& x : k.K_iota) {
      if (!std::isfinite(x)) x = inf;
    }
  }
  return k;
}

double assemble_bound(double K, const std::array<double, 12>& K_iota, const RateVector& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    // an infinite constant times a zero rate contributes nothing
    if (r[i] != 0.0) s += K_iota[i] * r[i];
  }
  return s == 0.0 ? 0.0 : K * s;
}

RateReport error_bound(const CoefficientSet& c, const NoiseModel& noise, double T) {
  RateReport rep;
  rep.T = T;
  rep.v = compute_v_quantities(c, noise, T);
  rep.r = compute_rates(c, noise, T);
  const Constants k = compute_constants(rep.v, T);
  rep.K = k.K;
  rep.K_iota = k.K_iota;
  rep.E_T = k.E_T;
  rep.V_T = k.V_T;
  rep.bound = assemble_bound(rep.K, rep.K_iota, rep.r);
  rep.vacuous = !std::isfinite(rep.bound) || rep.bound > 1e6 * rep.v.v_X;
  return rep;
}

ChaosRates chaos_rates(const CoefficientSet& c, const NoiseModel& noise, double T) {
  if (!(T > 0.0)) throw PreconditionError("horizon T must be > 0");
  check_compatible(c, noise);
  ChaosRates cr;
  const std::vector<double> ones_n(c.n, 1.0), ones_m(c.m, 1.0);
  cr.r_a = sqrt_max_gram(c.aP, ones_n);
  cr.r_sigma = sqrt_max_gram(c.sP, ones_n);
  cr.r_f = sqrt_max_gram(c.fP, ones_m);
  cr.r_rhoM = sqrt_max_gram(c.rP, noise.M_variances());
  return cr;
}

std::vector<ChaosInequality> chaos_inequalities(const CoefficientSet& c, const NoiseModel& noise,
                                                double T) {
  check_compatible(c, noise);
  for (Role role : {Role::aC, Role::sC, Role::fC, Role::rC}) {
    if (!c.get(role).is_diagonal()) {
      throw PreconditionError(std::string("chaos inequalities need a diagonal ") + role_name(role));
    }
  }
  if (!noise.L_cov.is_diagonal()) {
    throw PreconditionError("chaos inequalities need independent L across particles");
  }
  if (!noise.x0_cov.is_diagonal()) {
    throw PreconditionError("chaos inequalities need independent initial values");
  }
  const VQuantities v = compute_v_quantities(c, noise, T);
  const RateVector r = compute_rates(c, noise, T);
  const ChaosRates cr = chaos_rates(c, noise, T);
  struct Row {
    double rhs;
    bool eq;
    const char* expr;
  };
  const Row rows[12] = {
      {v.v_X * cr.r_a, false, "v_X * r_a"},
      {v.v_X * cr.r_sigma, false, "v_X * r_sigma"},
      {v.v_L * cr.r_a, false, "v_L * r_a"},
      {v.v_L * cr.r_sigma, false, "v_L * r_sigma"},
      {v.v_b * cr.r_f, false, "v_b * r_f"},
      {cr.r_rhoM, true, "r_rhoM"},
      {0.0, true, "0"},
      {0.0, true, "0"},
      {v.v_b * v.v_f * cr.r_a, false, "v_b * v_f * r_a"},
      {v.v_b * v.v_f * cr.r_sigma, false, "v_b * v_f * r_sigma"},
      {v.v_rho_M * cr.r_a, false, "v_rhoM * r_a"},
      {v.v_rho_M * cr.r_sigma, false, "v_rhoM * r_sigma"},
  };
  std::vector<ChaosInequality> out;
  for (int i = 0; i < 12; ++i) {
    const auto& row = rows[i];
    const double lhs = r[static_cast<std::size_t>(i)];
    bool ok;
    if (row.eq && row.rhs == 0.0) {
      ok = lhs == 0.0;
    } else if (row.eq) {
      ok = std::fabs(lhs - row.rhs) <= 1e-12 * std::max(lhs, row.rhs);
    } else {
      ok = within(lhs, row.rhs);
    }
    out.push_back({i + 1, lhs, row.rhs, row.eq, row.expr, ok});
  }
  return out;
}

SparsityReport sparsity_report(const CoefficientSet& c, const CorePeripheryLayout& layout,
                               const NoiseModel& noise, double R_A, double R_Sigma) {
  check_compatible(c, noise);
  if (layout.n() != c.n) throw PreconditionError("layout does not match the coefficient set");
  SparsityReport s;
  s.R_A = R_A;
  s.R_Sigma = R_Sigma;
  const auto periph = [&](std::size_t i) { return !layout.is_core(i); };
  for (const auto& e : noise.L_cov.entries()) {
    if (periph(e.row) && periph(e.col)) ++s.p_L;
  }
  auto row_count = [&](const SparseMatrix& a) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::size_t k = 0;
      for (auto j : a.row_cols(i)) k += periph(j) ? 1 : 0;
      best = std::max(best, k);
    }
    return best;
  };
  s.p_A1 = row_count(c.aP);
  s.p_Sigma = row_count(c.sP);
  auto col_count = [&](const SparseMatrix& a, std::size_t col_end, bool core_cols) {
    std::vector<std::size_t> cnt(a.cols(), 0);
    for (const auto& e : a.entries()) {
      if (periph(e.row)) ++cnt[e.col];
    }
    std::size_t best = 0;
    for (std::size_t j = 0; j < std::min(col_end, a.cols()); ++j) {
      if (!core_cols || layout.is_core(j)) best = std::max(best, cnt[j]);
    }
    return best;
  };
  s.p_A2 = col_count(c.aC, layout.n0, true);
  s.p_f = col_count(c.fC, layout.n00, false);
  s.p_rho = col_count(c.rC, layout.n00, false);
  for (const auto& e : c.aP.entries()) s.phi_sup = std::max(s.phi_sup, std::fabs(e.value) * R_A);
  for (const auto& e : c.sP.entries()) s.psi_sup = std::max(s.psi_sup, std::fabs(e.value) * R_Sigma);
  return s;
}

}  // namespace pmfnet
