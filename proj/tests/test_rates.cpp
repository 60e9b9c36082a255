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

#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pmfnet/error.hpp"
#include "pmfnet/experiment.hpp"
#include "pmfnet/families.hpp"
#include "pmfnet/rates.hpp"
#include "rates_oracle.hpp"

using namespace pmfnet;
using testing::brownian;

namespace {

CoefficientSet scale_periphery(CoefficientSet c, double s) {
  for (Role r : {Role::aP, Role::sP, Role::fP, Role::rP}) c.get(r) = c.get(r).scaled(s);
  return c;
}

}  // namespace

TEST_CASE("rates vanish without periphery") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    auto mi = random_config(rng, RandomKind::ZeroPeriphery, 10);
    auto r = compute_rates(mi.coeffs, mi.noise, 1.0);
    for (double v : r) CHECK(v == 0.0);
    CHECK(error_bound(mi.coeffs, mi.noise, 1.0).bound == 0.0);
  }
}

TEST_CASE("first rate of the mean-field family") {
  for (std::size_t N : {5u, 20u, 101u}) {
    const double v = 0.7;
    auto mi = mckean(N, 0.0, v * v);
    auto r = compute_rates(mi.coeffs, mi.noise, 1.0);
    CHECK(r[0] == doctest::Approx(v / std::sqrt(N - 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("diagonal core gives zero cross rates") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    auto mi = random_config(rng, RandomKind::DiagonalCore, 10);
    auto r = compute_rates(mi.coeffs, mi.noise, 1.0);
    CHECK(r[6] == 0.0);
    CHECK(r[7] == 0.0);
  }
}

TEST_CASE("constants") {
  VQuantities v;
  SUBCASE("no interaction") {
    v.v_X = 1.0;
    auto k = compute_constants(v, 1.0);
    CHECK(k.K == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(k.V_T == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }
  SUBCASE("no core diagonal") {
    v.v_a = 0.5;
    for (double T : {0.5, 1.0, 3.0}) {
      auto k = compute_constants(v, T);
      CHECK(k.E_T == 1.0);
      CHECK(k.K_iota[4] == T);
      CHECK(k.K_iota[5] == doctest::Approx(2.0 * std::sqrt(T)).epsilon(1e-15));
    }
  }
  SUBCASE("bad horizon") { CHECK_THROWS_AS(compute_constants(v, 0.0), PreconditionError); }
}

TEST_CASE("assembled bound recomputes from its parts") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 30; ++t) {
    auto mi = random_config(rng, RandomKind::General, 12);
    auto rep = error_bound(mi.coeffs, mi.noise, 1.0);
    CHECK(assemble_bound(rep.K, rep.K_iota, rep.r) == rep.bound);
    for (double x : rep.r) {
      CHECK(std::isfinite(x));
      CHECK(x >= 0.0);
    }
    CHECK(rep.vacuous == (rep.bound > 1e6 * rep.v.v_X));
  }
}

TEST_CASE("doubling the periphery at most doubles each rate") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 30; ++t) {
    auto mi = random_config(rng, RandomKind::General, 10);
    auto r1 = compute_rates(mi.coeffs, mi.noise, 1.0);
    auto r2 = compute_rates(scale_periphery(mi.coeffs, 2.0), mi.noise, 1.0);
    for (std::size_t k = 0; k < 12; ++k) CHECK(r2[k] <= 2.0 * r1[k] * (1.0 + 1e-14));
    auto b2 = error_bound(scale_periphery(mi.coeffs, 2.0), mi.noise, 1.0);
    auto b1 = error_bound(mi.coeffs, mi.noise, 1.0);
    double worst = 1.0;
    for (std::size_t k = 0; k < 12; ++k) {
      if (b1.r[k] > 0.0) worst = std::max(worst, b2.K * b2.K_iota[k] / (b1.K * b1.K_iota[k]));
    }
    CHECK(b2.bound >= b1.bound);
    CHECK(b2.bound <= 2.0 * worst * b1.bound * (1.0 + 1e-12));
  }
}

TEST_CASE("sparse rates match the dense transcription") {
  std::mt19937_64 rng(404);
  for (int t = 0; t < 100; ++t) {
    const auto kind = t % 3 == 0 ? RandomKind::DiagonalCore : RandomKind::General;
    auto mi = random_config(rng, kind, 8);
    auto a = compute_rates(mi.coeffs, mi.noise, 1.0);
    auto b = testing::dense_rates(mi.coeffs, mi.noise);
    CHECK(testing::rates_match(a, b, 1e-12));
  }
}

TEST_CASE("rates are monotone in the periphery drift") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 40; ++t) {
    auto mi = random_config(rng, RandomKind::General, 8);
    auto es = mi.coeffs.aP.entries();
    if (es.empty()) continue;
    auto e = es[rng() % es.size()];
    auto c = mi.coeffs;
    c.aP = c.aP.with_entry(e.row, e.col, e.value * 1.5);
    auto r0 = compute_rates(mi.coeffs, mi.noise, 1.0);
    auto r1 = compute_rates(c, mi.noise, 1.0);
    for (std::size_t k : {0u, 2u, 6u, 8u, 10u}) CHECK(r1[k] >= r0[k]);
  }
}

TEST_CASE("chaos rates") {
  for (std::size_t N : {4u, 16u, 64u}) {
    auto mi = classex(N);
    auto cr = chaos_rates(mi.coeffs, mi.noise, 1.0);
    CHECK(cr.r_a == doctest::Approx(std::sqrt(N - 1.0) / N).epsilon(1e-14));
    auto ineq = chaos_inequalities(mi.coeffs, mi.noise, 1.0);
    REQUIRE(ineq.size() == 12);
    for (const auto& q : ineq) CHECK(q.holds);
  }
  auto mi = mckean(6);
  auto cr = chaos_rates(mi.coeffs, mi.noise, 1.0);
  CHECK(cr.r_f == 0.0);
  CHECK(cr.r_rhoM == 0.0);
}

TEST_CASE("chaos inequalities") {
  SUBCASE("zero configuration") {
    auto c = build_coefficients(3, 3, {});
    auto noise = NoiseModel::quiet(3, 3, {0.0, 0.0, 0.0});
    for (const auto& q : chaos_inequalities(c, noise, 1.0)) {
      CHECK(q.holds);
      CHECK(q.lhs == 0.0);
      CHECK(q.rhs == 0.0);
    }
  }
  SUBCASE("random diagonal core") {
    std::mt19937_64 rng(55);
    for (int t = 0; t < 100; ++t) {
      auto mi = random_config(rng, RandomKind::DiagonalCore, 12);
      for (const auto& q : chaos_inequalities(mi.coeffs, mi.noise, 1.0)) CHECK(q.holds);
    }
  }
  SUBCASE("non-diagonal core is refused") {
    auto mi = sparse_core_periphery(10);
    CHECK_THROWS_AS(chaos_inequalities(mi.coeffs, mi.noise, 1.0), PreconditionError);
  }
}

TEST_CASE("sparsity report") {
  CorePeripheryLayout lay{2, 5, 1};
  const std::size_t n = 7, m = 8;
  std::vector<LevySpec> L(n, brownian(1.0)), M(m, brownian(1.0));
  auto noise = NoiseModel::make(L, {}, M, std::vector<DriftDensity>(m), std::vector<double>(n, 0.0),
                                std::vector<double>(n, 0.0), {});
  std::vector<Entry> ap, fc;
  for (std::size_t i = 2; i < n; ++i) {
    for (std::size_t j = 2; j < n; ++j) {
      if (i != j) ap.push_back({i, j, 0.1});
    }
    fc.push_back({i, lay.n00 + i, 1.0});
  }
  // three periphery rows load on the systematic column 0
  for (std::size_t i : {2u, 4u, 6u}) fc.push_back({i, 0, 0.5});
  auto c = build_coefficients(n, m, {{Role::aP, SparseMatrix::from_entries(n, n, ap)},
                                     {Role::fC, SparseMatrix::from_entries(n, m, fc)}});
  auto s = sparsity_report(c, lay, noise, 10.0, 1.0);
  CHECK(s.p_L == 5);
  CHECK(s.p_A1 == 4);
  CHECK(s.p_f == 3);
  CHECK(s.phi_sup == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rates decay on the sparse core-periphery family") {
  const std::vector<std::size_t> grid = {25, 50, 100, 200};
  std::vector<RateVector> rs;
  for (auto N : grid) {
    auto mi = sparse_core_periphery(N);
    CHECK(validate_layout(mi.coeffs, mi.layout).empty());
    rs.push_back(compute_rates(mi.coeffs, mi.noise, 1.0));
  }
  for (std::size_t k = 0; k < 12; ++k) {
    std::vector<double> xs, ys;
    for (std::size_t q = 0; q < grid.size(); ++q) {
      if (q > 0) CHECK(rs[q][k] < rs[q - 1][k]);
      xs.push_back(static_cast<double>(grid[q]));
      ys.push_back(rs[q][k]);
    }
    CHECK(loglog_slope(xs, ys) < -0.2);
  }
}
