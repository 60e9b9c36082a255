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

#include "pmfnet/network.hpp"

#include <algorithm>
#include <cmath>

#include "pmfnet/error.hpp"

namespace pmfnet {

namespace {
constexpr const char* kNames[] = {"aC", "aP", "sC", "sP", "fC", "fP", "rC", "rP"};
}

const char* role_name(Role r) { return kNames[static_cast<int>(r)]; }

std::optional<Role> role_from_name(const std::string& name) {
  for (int k = 0; k < 8; ++k) {
    if (name == kNames[k]) return static_cast<Role>(k);
  }
  return std::nullopt;
}

const SparseMatrix& CoefficientSet::get(Role r) const {
  switch (r) {
    case Role::aC: return aC;
    case Role::aP: return aP;
    case Role::sC: return sC;
    case Role::sP: return sP;
    case Role::fC: return fC;
    case Role::fP: return fP;
    case Role::rC: return rC;
    case Role::rP: return rP;
  }
  return aC;
}

SparseMatrix& CoefficientSet::get(Role r) {
  return const_cast<SparseMatrix&>(static_cast<const CoefficientSet&>(*this).get(r));
}

CoefficientSet build_coefficients(std::size_t n, std::size_t m,
                                  std::vector<std::pair<Role, SparseMatrix>> blocks) {
  CoefficientSet c;
  c.n = n;
  c.m = m;
  std::array<bool, 8> seen{};
  for (auto& [role, mat] : blocks) {
    const bool square = role == Role::aC || role == Role::aP || role == Role::sC || role == Role::sP;
    const std::size_t want_cols = square ? n : m;
    if (mat.rows() != n || mat.cols() != want_cols) {
      throw ConfigError(std::string(role_name(role)) + " must be " + std::to_string(n) + "x" +
                        std::to_string(want_cols) + ", got " + std::to_string(mat.rows()) + "x" +
                        std::to_string(mat.cols()));
    }
    auto k = static_cast<std::size_t>(role);
    if (seen[k]) throw ConfigError(std::string(role_name(role)) + " supplied twice");
    seen[k] = true;
    c.get(role) = std::move(mat);
  }
  for (Role r : kAllRoles) {
    if (!seen[static_cast<std::size_t>(r)]) {
      const bool square = r == Role::aC || r == Role::aP || r == Role::sC || r == Role::sP;
      c.get(r) = SparseMatrix(n, square ? n : m);
    }
  }
  return c;
}

std::vector<LayoutViolation> validate_layout(const CoefficientSet& c,
                                             const CorePeripheryLayout& layout) {
  std::vector<LayoutViolation> out;
  if (layout.n() != c.n) {
    out.push_back({"layout", layout.n(), c.n, "n0 + n_periphery must equal n"});
    return out;
  }
  if (layout.n00 + c.n != c.m) {
    out.push_back({"layout", layout.n00, c.m, "noise count must equal n00 + n"});
    return out;
  }
  auto scan = [&](const SparseMatrix& a, const char* name, auto&& ok, const char* rule) {
    for (const auto& e : a.entries()) {
      if (!ok(e.row, e.col)) out.push_back({name, e.row, e.col, rule});
    }
  };
  const auto core = [&](std::size_t j) { return layout.is_core(j); };
  scan(c.aP, "aP", [&](std::size_t i, std::size_t j) { return !core(j) && i != j; },
       "periphery drift lives on periphery columns off the diagonal");
  scan(c.sP, "sP", [&](std::size_t i, std::size_t j) { return !core(j) && i != j; },
       "periphery volatility lives on periphery columns off the diagonal");
  scan(c.aC, "aC", [&](std::size_t i, std::size_t j) { return i == j || core(j); },
       "core drift off the diagonal lives on core columns");
  scan(c.sC, "sC", [&](std::size_t i, std::size_t j) { return i == j || core(j); },
       "core volatility off the diagonal lives on core columns");
  const auto own = [&](std::size_t i, std::size_t j) {
    return j < layout.n00 || j == layout.n00 + i;
  };
  scan(c.fC, "fC", own, "core drift noise uses systematic or own idiosyncratic columns");
  scan(c.rC, "rC", own, "core martingale noise uses systematic or own idiosyncratic columns");
  scan(c.fP, "fP", [&](std::size_t i, std::size_t j) { return !own(i, j); },
       "periphery drift noise avoids systematic and own idiosyncratic columns");
  scan(c.rP, "rP", [&](std::size_t i, std::size_t j) { return !own(i, j); },
       "periphery martingale noise avoids systematic and own idiosyncratic columns");
  return out;
}

void check_compatible(const CoefficientSet& c, const NoiseModel& noise) {
  if (noise.n() != c.n || noise.m() != c.m) {
    throw ConfigError("noise model is " + std::to_string(noise.n()) + "x" +
                      std::to_string(noise.m()) + " but coefficients are " +
                      std::to_string(c.n) + "x" + std::to_string(c.m));
  }
}

void require_zero_periphery_diagonal(const CoefficientSet& c) {
  for (std::size_t i = 0; i < c.n; ++i) {
    if (c.aP.at(i, i) != 0.0) {
      throw LayoutError("aP(" + std::to_string(i) + "," + std::to_string(i) +
                        ") is nonzero; self-interaction belongs to aC");
    }
    if (c.sP.at(i, i) != 0.0) {
      throw LayoutError("sP(" + std::to_string(i) + "," + std::to_string(i) +
                        ") is nonzero; self-interaction belongs to sC");
    }
  }
}

VQuantities compute_v_quantities(const CoefficientSet& c, const NoiseModel& noise, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw PreconditionError("horizon T must be > 0");
  check_compatible(c, noise);
  VQuantities v;
  v.T = T;
  v.v_a = (c.aC.abs() + c.aP.abs()).max_abs_row_sum();
  v.v_a_d = c.aC.max_abs_diagonal();
  v.v_sigma = (c.sC.abs() + c.sP.abs()).max_abs_row_sum();
  v.v_f = (c.fC.abs() + c.fP.abs()).max_abs_row_sum();
  for (std::size_t i = 0; i < c.n; ++i) {
    v.v_L = std::max(v.v_L, std::sqrt(noise.L[i].variance()));
    const double m = noise.x0_mean[i];
    v.v_X = std::max(v.v_X, std::sqrt(m * m + noise.x0_cov.at(i, i)));
  }
  for (const auto& b : noise.b) v.v_b = std::max(v.v_b, std::sqrt(b.sup_second_moment(T)));
  // M columns are independent, so only the diagonal of c enters
  const auto cvar = noise.M_variances();
  const auto rho2 = c.rC.squared_entries() + c.rP.squared_entries();
  double best = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    auto cols = rho2.row_cols(i);
    auto vals = rho2.row_values(i);
    double s = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) s += vals[k] * cvar[cols[k]];
    best = std::max(best, s);
  }
  v.v_rho_M = std::sqrt(best);
  for (double x : {v.v_a, v.v_a_d, v.v_sigma, v.v_L, v.v_b, v.v_X, v.v_f, v.v_rho_M}) {
    if (!std::isfinite(x)) throw NumericError("v-quantities overflow");
  }
  return v;
}

}  // namespace pmfnet
