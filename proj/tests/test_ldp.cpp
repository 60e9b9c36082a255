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

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ldp_oracle.hpp"
#include "pmfnet/error.hpp"
#include "pmfnet/families.hpp"
#include "pmfnet/ldp.hpp"

using namespace pmfnet;
using testing::brownian;
using testing::poisson;

namespace {

AtomicMeasure one_atom(std::size_t d, double t, double w, double T = 1.0) {
  AtomicMeasure th;
  th.T = T;
  th.coords.assign(d, {{t, w}});
  return th;
}

AtomicMeasure random_measure(std::mt19937_64& rng, std::size_t d, std::size_t K, double T) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  AtomicMeasure th;
  th.T = T;
  th.coords.resize(d);
  for (auto& c : th.coords) {
    for (std::size_t k : {K / 4, K / 2, K}) c.push_back({T * k / K, u(rng)});
  }
  return th;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("matrix exponential") {
  SUBCASE("zero generator") {
    Eigen::MatrixXd V = Eigen::MatrixXd::Random(3, 2);
    CHECK(matrix_exponential_apply(SparseMatrix(3, 3), 1.0, V) == V);
  }
  SUBCASE("diagonal") {
    auto E = matrix_exponential_apply(SparseMatrix::identity(3, -1.0), 1.0, Eigen::MatrixXd::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(E(i, i) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(E(0, 1) == 0.0);
  }
  SUBCASE("nilpotent series terminates") {
    auto A = SparseMatrix::from_entries(2, 2, {{0, 1, 1.0}});
    auto E = matrix_exponential_apply(A, 1.0, Eigen::MatrixXd::Identity(2, 2));
    CHECK(E(0, 0) == 1.0);
    CHECK(E(0, 1) == 1.0);
    CHECK(E(1, 0) == 0.0);
    CHECK(E(1, 1) == 1.0);
  }
  SUBCASE("rotation") {
    Eigen::MatrixXd A(2, 2);
    A << 0.0, -3.0, 3.0, 0.0;
    auto E = matrix_exponential(A);
    CHECK(E(0, 0) == doctest::Approx(std::cos(3.0)).epsilon(1e-13));
    CHECK(E(1, 0) == doctest::Approx(std::sin(3.0)).epsilon(1e-13));
  }
  SUBCASE("agrees with Pade on random matrices") {
    std::srand(4);
    for (int t = 0; t < 20; ++t) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Random(6, 6) * (0.5 + t * 0.2);
      Eigen::MatrixXd ref = A.exp();
      CHECK(max_abs_diff(matrix_exponential(A), ref) <= 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
  }
  SUBCASE("non-finite input") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    A(0, 0) = NAN;
    CHECK_THROWS_AS(matrix_exponential(A), NumericError);
  }
}

TEST_CASE("kernel tables") {
  LDConfig ld;
  SUBCASE("no periphery drift, no periphery loading") {
    auto c = build_coefficients(3, 3, {{Role::aC, SparseMatrix::identity(3, -1.0)}, {Role::rC, SparseMatrix::identity(3)}});
    auto k = build_kernels(c, ld, 3, 1.0, 10, 3);
    for (double v : k.G) CHECK(v == 0.0);
    for (double v : k.R) CHECK(v == 0.0);
  }
  SUBCASE("dense reference") {
    testing::SwapSystem sys{0.8, 0.6, 0.4};
    auto c = sys.coefficients();
    auto k = build_kernels(c, ld, 2, 1.0, 20, 2);
    Eigen::MatrixXd a = to_dense(c.aC + c.aP), aC = to_dense(c.aC), aP = to_dense(c.aP), rP = to_dense(c.rP);
    for (std::size_t kt = 0; kt <= 20; kt += 7) {
      for (std::size_t ks = 0; ks <= 20; ks += 5) {
        Eigen::MatrixXd G = 2.0 * (a * (kt * 0.05)).exp() * aP * (aC * (ks * 0.05)).exp();
        for (std::size_t i = 0; i < 2; ++i) {
          for (std::size_t m = 0; m < 2; ++m) CHECK(k.G_at(kt, ks, i, m) == doctest::Approx(G(i, m)).epsilon(1e-13));
        }
      }
      Eigen::MatrixXd R = 2.0 * (a * (kt * 0.05)).exp() * rP;
      for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t m = 0; m < 2; ++m) CHECK(k.R_at(kt, i, m) == doctest::Approx(R(i, m)).epsilon(1e-13));
      }
    }
  }
  SUBCASE("zero total drift collapses the left exponential") {
    // aC = -aP so that a = 0 and G(t, s) does not depend on t
    auto aP = SparseMatrix::from_entries(2, 2, {{0, 1, 0.7}, {1, 0, 0.2}});
    auto c = build_coefficients(2, 2, {{Role::aC, aP.scaled(-1.0)}, {Role::aP, aP}, {Role::rC, SparseMatrix::identity(2)}});
    auto k = build_kernels(c, ld, 2, 1.0, 8, 2);
    for (std::size_t ks = 0; ks <= 8; ++ks) {
      for (std::size_t kt = 1; kt <= 8; ++kt) {
        for (std::size_t i = 0; i < 2; ++i) {
          for (std::size_t m = 0; m < 2; ++m) CHECK(k.G_at(kt, ks, i, m) == doctest::Approx(k.G_at(0, ks, i, m)).epsilon(1e-14));
        }
      }
    }
    CHECK(k.G_at(0, 0, 0, 1) == doctest::Approx(2.0 * 0.7).epsilon(1e-15));
    CHECK(k.G_at(0, 0, 1, 0) == doctest::Approx(2.0 * 0.2).epsilon(1e-15));
  }
  SUBCASE("volatility is outside the kernel model") {
    auto mi = classex(4);
    CHECK_THROWS_AS(build_kernels(mi.coeffs, ld, 4, 1.0, 10, 2), PreconditionError);
  }
}

TEST_CASE("kernel tables settle as N grows") {
  LDConfig ld;
  std::vector<KernelSet> ks;
  for (std::size_t N : {5u, 10u, 20u, 40u, 80u}) ks.push_back(build_kernels(mckean_tail(N).coeffs, ld, N, 1.0, 20, 2));
  double prev = INFINITY;
  for (std::size_t q = 1; q < ks.size(); ++q) {
    const double gap = kernel_gap(ks[q - 1], ks[q]);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("q quantities") {
  LDConfig ld;
  SUBCASE("diagonal core") {
    auto mi = mckean(5);
    CHECK(q_quantities(mi.coeffs, ld, 5).q1 == 0.0);
  }
  SUBCASE("no periphery") {
    auto c = build_coefficients(3, 3, {{Role::aC, SparseMatrix::from_entries(3, 3, {{0, 1, 1.0}})}, {Role::rC, SparseMatrix::identity(3)}});
    auto q = q_quantities(c, ld, 3);
    CHECK(q.q1 == 0.0);
    CHECK(q.q2 == 0.0);
  }
  SUBCASE("three particles against a triple sum") {
    const double aC[3][3] = {{-1.0, 0.4, 0.0}, {0.2, -0.5, -0.3}, {0.0, 0.6, -1.0}};
    const double aP[3][3] = {{0.0, 0.1, -0.2}, {0.3, 0.0, 0.05}, {0.0, -0.15, 0.0}};
    const double rC[3][3] = {{1.0, 0.0, 0.5}, {0.0, -0.7, 0.0}, {0.2, 0.0, 1.0}};
    std::vector<Entry> ec, ep, er;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        ec.push_back({i, j, aC[i][j]});
        ep.push_back({i, j, aP[i][j]});
        er.push_back({i, j, rC[i][j]});
      }
    }
    auto c = build_coefficients(3, 3, {{Role::aC, SparseMatrix::from_entries(3, 3, ec)},
                                       {Role::aP, SparseMatrix::from_entries(3, 3, ep)},
                                       {Role::rC, SparseMatrix::from_entries(3, 3, er)}});
    double q1 = 0.0, q2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      double row = 0.0;
      for (int j = 0; j < 3; ++j) {
        double s2 = 0.0;
        for (int k = 0; k < 3; ++k) {
          if (k != j) row += std::fabs(aP[i][k]) * std::fabs(aC[k][j]);
          s2 += std::fabs(aP[i][k]) * std::fabs(rC[k][j]);
        }
        q2 = std::max(q2, s2);
      }
      q1 = std::max(q1, row);
    }
    auto q = q_quantities(c, ld, 3);
    CHECK(q.q1 == doctest::Approx(3.0 * q1).epsilon(1e-15));
    CHECK(q.q2 == doctest::Approx(3.0 * q2).epsilon(1e-15));
  }
  SUBCASE("growth condition") {
    auto mi = mckean(10);
    CHECK(growth_ok(mi.coeffs, ld, 10));
    LDConfig tiny;
    tiny.gamma_of_N = [](std::size_t) { return std::size_t{1}; };
    CHECK_FALSE(growth_ok(mi.coeffs, tiny, 10));
  }
}

TEST_CASE("H is linear and picks up constant loadings") {
  LDConfig ld;
  SUBCASE("zero measure") {
    auto k = build_kernels(mckean_tail(4).coeffs, ld, 4, 1.0, 10, 3);
    auto th = one_atom(3, 0.5, 0.0);
    for (std::size_t r = 0; r <= 10; ++r) CHECK(H_m(k, th, 1, r) == 0.0);
  }
  SUBCASE("constant R, no G") {
    std::vector<Entry> rp;
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t m = 0; m < 2; ++m) rp.push_back({i, m, 0.5});
    }
    auto c = build_coefficients(2, 2, {{Role::rP, SparseMatrix::from_entries(2, 2, rp)}});
    auto k = build_kernels(c, ld, 2, 1.0, 10, 2);
    const double w = 0.8;
    CHECK(H_m(k, one_atom(1, 1.0, w), 0, 3) == doctest::Approx(w).epsilon(1e-15));
    CHECK(H_m(k, one_atom(2, 1.0, w), 1, 3) == doctest::Approx(2.0 * w).epsilon(1e-15));
  }
  SUBCASE("linearity") {
    auto k = build_kernels(mckean_tail(6).coeffs, ld, 6, 1.0, 40, 2);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      auto a = random_measure(rng, 2, 40, 1.0), b = random_measure(rng, 2, 40, 1.0);
      auto s = combine(a, 1.0, b, 1.0);
      for (std::size_t r : {0u, 7u, 20u, 39u}) {
        for (std::size_t m = 0; m < k.gamma; ++m) {
          CHECK(std::fabs(H_m(k, s, m, r) - H_m(k, a, m, r) - H_m(k, b, m, r)) < 1e-12);
        }
      }
    }
  }
  SUBCASE("atoms must sit on the grid") {
    auto k = build_kernels(mckean_tail(4).coeffs, ld, 4, 1.0, 10, 2);
    CHECK_THROWS_AS(H_m(k, one_atom(1, 0.55, 1.0), 0, 0), PreconditionError);
  }
}

TEST_CASE("lambda against the closed-form swap system") {
  testing::SwapSystem sys{0.8, 0.6, 0.4};
  const double var[2] = {1.0, 0.5};
  std::vector<LevySpec> specs = {brownian(var[0]), brownian(var[1])};
  LDConfig ld;
  const double w = 0.7;
  const double oracle = sys.lambda_brownian(1.0, w, 2.0, var, 20000);
  SUBCASE("fine grid") {
    auto k = build_kernels(sys.coefficients(), ld, 2, 1.0, 2000, 1);
    const double lam = lambda_at(k, specs, one_atom(1, 1.0, w));
    CHECK(std::fabs(lam - oracle) <= 1e-6 * oracle);
  }
  SUBCASE("second-order convergence") {
    std::vector<double> lam;
    for (std::size_t K : {50u, 100u, 200u}) {
      auto k = build_kernels(sys.coefficients(), ld, 2, 1.0, K, 1);
      lam.push_back(lambda_at(k, specs, one_atom(1, 1.0, w)));
    }
    const double d1 = lam[0] - lam[1], d2 = lam[1] - lam[2];
    CHECK(std::fabs(d2) < 4.0 * std::fabs(d1) / 4.0);
    CHECK(std::fabs(lam[2] - oracle) < std::fabs(lam[1] - oracle));
  }
}

TEST_CASE("lambda is convex, nonnegative and zero at zero") {
  LDConfig ld;
  auto k = build_kernels(mckean_tail(6).coeffs, ld, 6, 1.0, 40, 2);
  std::vector<LevySpec> specs;
  for (std::size_t m = 0; m < 6; ++m) {
    specs.push_back(m % 2 ? brownian(1.0) : poisson(0.3, 1.5, {{0.5, 0.6}, {-0.8, 0.4}}));
  }
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  CHECK(lambda_at(k, specs, random_measure(rng, 2, 40, 1.0).scaled(0.0)) == 0.0);
  for (int t = 0; t < 100; ++t) {
    auto a = random_measure(rng, 2, 40, 1.0), b = random_measure(rng, 2, 40, 1.0);
    const double s = u01(rng);
    const double la = lambda_at(k, specs, a), lb = lambda_at(k, specs, b);
    CHECK(la >= 0.0);
    CHECK(lambda_at(k, specs, combine(a, s, b, 1.0 - s)) <= s * la + (1.0 - s) * lb + 1e-9);
  }
}

TEST_CASE("Cesaro averages") {
  const AtomicMeasure th = one_atom(2, 1.0, 0.9);
  SUBCASE("zero measure") {
    LDConfig ld;
    ld.dominating = brownian(1.0);
    std::vector<KernelSet> ks;
    for (std::size_t N : {4u, 8u}) ks.push_back(build_kernels(mckean_tail(N).coeffs, ld, N, 1.0, 20, 2));
    auto res = lambda_cesaro(ks, [](std::size_t N) { return mckean_tail(N).noise.M; }, ld, th.scaled(0.0));
    CHECK(res.lambda == 0.0);
    CHECK(res.cauchy_gap == 0.0);
  }
  SUBCASE("exchangeable columns give a constant sequence") {
    // rP = 1/N everywhere and a = -I, so R(t) = e^{-t} in every column for every N
    LDConfig ld;
    ld.dominating = brownian(1.0);
    auto family = [](std::size_t N) {
      std::vector<Entry> rp;
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t m = 0; m < N; ++m) rp.push_back({i, m, 1.0 / static_cast<double>(N)});
      }
      return build_coefficients(N, N, {{Role::aC, SparseMatrix::identity(N, -1.0)},
                                       {Role::rP, SparseMatrix::from_entries(N, N, rp)}});
    };
    std::vector<KernelSet> ks;
    for (std::size_t N : {3u, 6u, 12u}) ks.push_back(build_kernels(family(N), ld, N, 1.0, 20, 2));
    auto res = lambda_cesaro(ks, [](std::size_t N) { return std::vector<LevySpec>(N, brownian(1.0)); }, ld, th);
    CHECK(res.averages[0] > 0.0);
    for (double a : res.averages) CHECK(a == doctest::Approx(res.averages[0]).epsilon(1e-12));
  }
  SUBCASE("domination and grid order are enforced") {
    LDConfig ld;
    ld.dominating = brownian(0.5);
    std::vector<KernelSet> ks = {build_kernels(mckean_tail(4).coeffs, ld, 4, 1.0, 10, 2)};
    CHECK_THROWS_AS(lambda_cesaro(ks, [](std::size_t N) { return mckean_tail(N).noise.M; }, ld, th),
                    PreconditionError);
    ld.dominating = brownian(1.0);
    ks.push_back(ks[0]);
    CHECK_THROWS_AS(lambda_cesaro(ks, [](std::size_t N) { return mckean_tail(N).noise.M; }, ld, th),
                    PreconditionError);
  }
}

TEST_CASE("Legendre probe") {
  LDConfig ld;
  auto k = build_kernels(mckean_tail(4).coeffs, ld, 4, 1.0, 20, 2);
  auto specs = mckean_tail(4).noise.M;
  auto support = one_atom(2, 1.0, 0.0);
  auto zero = lambda_star_probe(k, specs, support, {{0.0}, {0.0}});
  CHECK(zero.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.value >= 0.0);
  auto away = lambda_star_probe(k, specs, support, {{0.5}, {-0.3}});
  CHECK(away.value > 0.0);
  // the probe is a lower bound, so it dominates the pairing at any fixed weight
  auto fixed = support;
  fixed.coords[0][0].weight = 0.2;
  fixed.coords[1][0].weight = -0.1;
  CHECK(away.value >= 0.2 * 0.5 + 0.1 * 0.3 - lambda_at(k, specs, fixed) - 1e-12);
}

TEST_CASE("tail probabilities") {
  SimConfig sim;
  sim.T = 1.0;
  sim.steps = 50;
  sim.n_paths = 400;
  sim.seed = 6;
  LDConfig ld;
  SUBCASE("level zero is certain") {
    auto pts = tail_slope([](std::size_t N) { auto mi = mckean_tail(N); return std::make_pair(mi.coeffs, mi.noise); },
                          {4, 8}, ld, 0.0, sim, 2);
    for (const auto& t : pts) {
      CHECK(t.p_hat == 1.0);
      CHECK(t.normalized_log == 0.0);
    }
  }
  SUBCASE("exact coupling never exceeds") {
    std::mt19937_64 rng(1);
    auto mi = random_config(rng, RandomKind::ZeroPeriphery, 6);
    auto pts = tail_slope([&](std::size_t) { return std::make_pair(mi.coeffs, mi.noise); }, {3, 6}, ld, 1e-9, sim, 4);
    for (const auto& t : pts) {
      CHECK(t.exceedances == 0);
      CHECK(t.below_floor);
      CHECK(std::isinf(t.normalized_log));
    }
  }
  SUBCASE("Wilson interval") {
    const double z = 1.959963984540054;
    auto a = wilson_interval(0, 100, z);
    CHECK(a.first == 0.0);
    CHECK(a.second == doctest::Approx(0.03699349820698569).epsilon(1e-12));
    auto b = wilson_interval(50, 100, z);
    CHECK(b.first == doctest::Approx(0.4038315303659956).epsilon(1e-12));
    CHECK(b.second == doctest::Approx(0.5961684696340044).epsilon(1e-12));
    auto c = wilson_interval(3, 1000, z);
    CHECK(c.first == doctest::Approx(0.0010207838811386195).epsilon(1e-12));
    CHECK(c.second == doctest::Approx(0.008783014053503176).epsilon(1e-12));
    CHECK(wilson_interval(7, 7, z).first == doctest::Approx(0.6456695649333125).epsilon(1e-12));
  }
}
