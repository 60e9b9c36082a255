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
#include "pmfnet/families.hpp"
#include "pmfnet/rates.hpp"
#include "pmfnet/simulate.hpp"

using namespace pmfnet;
using testing::brownian;

namespace {

SimConfig small_sim(std::size_t paths, std::size_t steps, std::uint64_t seed = 1) {
  SimConfig s;
  s.T = 1.0;
  s.steps = steps;
  s.n_paths = paths;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("mean curve") {
  auto grid = uniform_grid(1.0, 100);
  SUBCASE("no drift keeps the initial mean") {
    auto c = build_coefficients(2, 1, {});
    auto mc = solve_mean_curve(c, NoiseModel::quiet(2, 1, {0.5, -2.0}), grid);
    for (std::size_t k = 0; k <= 100; ++k) {
      CHECK(mc.at(k)[0] == 0.5);
      CHECK(mc.at(k)[1] == -2.0);
    }
  }
  SUBCASE("exponential decay") {
    auto c = build_coefficients(1, 1, {{Role::aC, SparseMatrix::identity(1, -1.0)}});
    auto mc = solve_mean_curve(c, NoiseModel::quiet(1, 1, {1.0}), grid);
    double err = 0.0;
    for (std::size_t k = 0; k <= 100; ++k) err = std::max(err, std::fabs(mc.at(k)[0] - std::exp(-grid[k])));
    CHECK(err < 1e-8);
  }
  SUBCASE("equal means are a fixed point of the mean-field drift") {
    auto mi = mckean(6, 0.7, 1.0);
    auto mc = solve_mean_curve(mi.coeffs, mi.noise, grid);
    for (double v : mc.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  }
}

TEST_CASE("single Euler steps") {
  SUBCASE("zero coefficients") {
    auto c = build_coefficients(3, 2, {});
    std::vector<double> x = {1.0, -2.0, 3.0}, dL = {0.1, 0.2, 0.3}, dM = {0.5, 0.5}, b = {1.0, 1.0};
    auto before = x;
    step_ips(x, c, dL, dM, b, 0.01);
    CHECK(x == before);
  }
  SUBCASE("scalar decay") {
    auto c = build_coefficients(1, 1, {{Role::aC, SparseMatrix::identity(1, -1.0)}});
    std::vector<double> x = {1.0}, z1 = {0.0};
    step_ips(x, c, z1, z1, z1, 0.01);
    CHECK(x[0] == doctest::Approx(0.99).epsilon(1e-15));
  }
  SUBCASE("entrywise volatility") {
    auto c = build_coefficients(3, 1, {{Role::sC, SparseMatrix::identity(3)}});
    std::vector<double> x = {1.0, 2.0, -4.0}, dL = {0.1, 0.1, 0.1}, z = {0.0};
    step_ips(x, c, dL, z, z, 0.01);
    CHECK(x[0] == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(2.2).epsilon(1e-15));
    CHECK(x[2] == doctest::Approx(-4.4).epsilon(1e-15));
  }
}

TEST_CASE("partial mean-field step collapses without periphery") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    auto mi = random_config(rng, RandomKind::ZeroPeriphery, 12);
    const std::size_t n = mi.coeffs.n, m = mi.coeffs.m;
    std::vector<double> x(n), dL(n), dM(m), b(m), Eb(m), mean(n);
    for (auto* v : {&x, &dL, &mean}) {
      for (auto& e : *v) e = u(rng);
    }
    for (auto* v : {&dM, &b, &Eb}) {
      for (auto& e : *v) e = u(rng);
    }
    auto xb = x;
    step_ips(x, mi.coeffs, dL, dM, b, 0.01);
    step_pmfs(xb, mean, mi.coeffs, dL, dM, b, Eb, 0.01);
    CHECK(x == xb);
  }
}

TEST_CASE("pair trajectories") {
  SUBCASE("deterministic start and no noise follow the mean curve") {
    auto mi = classex(5);
    NoiseModel quiet = NoiseModel::quiet(5, mi.coeffs.m, std::vector<double>(5, 1.0));
    quiet.b = mi.noise.b;
    for (auto& b : quiet.b) b.white_var = 0.0;
    auto tr = simulate_pair(mi.coeffs, quiet, small_sim(1, 2000), 0);
    double err = 0.0;
    for (std::size_t k = 0; k < tr.X.size(); ++k) err = std::max(err, std::fabs(tr.Xbar[k] - tr.mean[k]));
    // Euler against RK4
    CHECK(err < 1e-3);
    CHECK(tr.X.front() == tr.Xbar.front());
  }
  SUBCASE("periphery noise loading moves only the particle system") {
    auto c = build_coefficients(2, 2, {{Role::rP, SparseMatrix::from_entries(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}})}});
    auto noise = NoiseModel::make({brownian(0.0), brownian(0.0)}, {}, {brownian(1.0), brownian(1.0)},
                                  {DriftDensity{}, DriftDensity{}}, {0.3, -0.3}, {0.0, 0.0}, {});
    auto tr = simulate_pair(c, noise, small_sim(1, 50), 7);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      CHECK(tr.Xbar[k * 2] == 0.3);
      CHECK(tr.Xbar[k * 2 + 1] == -0.3);
    }
    CHECK(tr.X.back() != 0.3);
  }
  SUBCASE("same index, same path") {
    std::mt19937_64 rng(3);
    auto mi = random_config(rng, RandomKind::General, 6);
    auto a = simulate_pair(mi.coeffs, mi.noise, small_sim(10, 40), 4);
    auto b = simulate_pair(mi.coeffs, mi.noise, small_sim(10, 40), 4);
    CHECK(a.to_csv() == b.to_csv());
  }
}

TEST_CASE("coupling identity without periphery") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 10; ++t) {
    auto mi = random_config(rng, RandomKind::ZeroPeriphery, 15);
    auto est = estimate_error(mi.coeffs, mi.noise, small_sim(64, 50, 5 + t));
    CHECK(est.delta_hat == 0.0);
    CHECK(est.std_err == 0.0);
    auto tr = simulate_pair(mi.coeffs, mi.noise, small_sim(4, 50), 2);
    CHECK(tr.X == tr.Xbar);
  }
}

TEST_CASE("self-interaction in the periphery is rejected") {
  auto c = build_coefficients(1, 1, {{Role::aP, SparseMatrix::identity(1)}});
  auto noise = NoiseModel::quiet(1, 1, {1.0});
  CHECK_THROWS_AS(estimate_error(c, noise, small_sim(10, 10)), LayoutError);
}

TEST_CASE("invalid simulation settings") {
  auto mi = mckean(4);
  CHECK_THROWS_AS(estimate_error(mi.coeffs, mi.noise, small_sim(0, 10)), PreconditionError);
  CHECK_THROWS_AS(estimate_error(mi.coeffs, mi.noise, small_sim(10, 0)), PreconditionError);
}

TEST_CASE("mean-field error halves with four times the particles") {
  auto sim = small_sim(4000, 100, 17);
  auto a = estimate_error(mckean(20).coeffs, mckean(20).noise, sim);
  auto b = estimate_error(mckean(40).coeffs, mckean(40).noise, sim);
  const double ratio = b.delta_hat / a.delta_hat;
  const double se = ratio * std::hypot(a.std_err / a.delta_hat, b.std_err / b.delta_hat);
  CHECK(std::fabs(ratio - 1.0 / std::sqrt(2.0)) < 4.0 * se + 0.02);
  CHECK(a.per_particle.size() == 20);
  CHECK(a.n_paths_used == 4000);
}

TEST_CASE("time step robustness") {
  auto mi = mckean(20);
  auto a = estimate_error(mi.coeffs, mi.noise, small_sim(4000, 100, 3));
  auto b = estimate_error(mi.coeffs, mi.noise, small_sim(4000, 200, 3));
  CHECK(std::fabs(a.delta_hat - b.delta_hat) < 3.0 * std::max(a.std_err, b.std_err));
}

TEST_CASE("terminal mean of the partial mean-field system") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 5; ++t) {
    auto mi = random_config(rng, RandomKind::General, 8);
    auto sim = small_sim(4000, 50, 40 + t);
    auto est = estimate_error(mi.coeffs, mi.noise, sim);
    auto mc = solve_mean_curve(mi.coeffs, mi.noise, uniform_grid(1.0, 50));
    for (std::size_t i = 0; i < mi.coeffs.n; ++i) {
      const double sigma = std::sqrt(est.xbar_var_T[i] / static_cast<double>(est.n_paths_used));
      // Euler bias on top of the Monte Carlo error
      CHECK(std::fabs(est.xbar_mean_T[i] - mc.at(50)[i]) < 4.0 * sigma + 0.02);
    }
  }
}

TEST_CASE("estimates stay below the error bound") {
  std::mt19937_64 rng(5150);
  for (int t = 0; t < 10; ++t) {
    auto mi = random_config(rng, RandomKind::General, 10);
    auto rep = error_bound(mi.coeffs, mi.noise, 1.0);
    auto est = estimate_error(mi.coeffs, mi.noise, small_sim(500, 50, t));
    CHECK(est.delta_hat + 3.0 * est.std_err <= rep.bound);
  }
}

TEST_CASE("thread count does not change estimates") {
  std::mt19937_64 rng(1);
  auto mi = random_config(rng, RandomKind::General, 12);
  auto s1 = small_sim(777, 30, 8);
  auto s4 = s1;
  s1.threads = 1;
  s4.threads = 4;
  auto a = estimate_error(mi.coeffs, mi.noise, s1);
  auto b = estimate_error(mi.coeffs, mi.noise, s4);
  CHECK(a.delta_hat == b.delta_hat);
  CHECK(a.std_err == b.std_err);
  CHECK(a.per_particle == b.per_particle);
  CHECK(coupled_sup_samples(mi.coeffs, mi.noise, s1, 3) == coupled_sup_samples(mi.coeffs, mi.noise, s4, 3));
}
