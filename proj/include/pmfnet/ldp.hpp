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

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmfnet/network.hpp"
#include "pmfnet/noise.hpp"
#include "pmfnet/simulate.hpp"

namespace pmfnet {

// e^{A} by scaling and squaring of a Taylor series.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A);
Eigen::MatrixXd matrix_exponential_apply(const SparseMatrix& A, double t, const Eigen::MatrixXd& V);
Eigen::MatrixXd to_dense(const SparseMatrix& A);

struct Atom {
  double time;
  double weight;
};

struct AtomicMeasure {
  double T = 1.0;
  std::vector<std::vector<Atom>> coords;  // one atom list per observed coordinate

  double total_variation() const;
  void validate() const;
  AtomicMeasure scaled(double s) const;
};

// Same atom positions required; weights combine linearly.
AtomicMeasure combine(const AtomicMeasure& a, double s, const AtomicMeasure& b, double t);

struct LDConfig {
  std::function<std::size_t(std::size_t)> gamma_of_N = [](std::size_t N) { return N; };
  LevySpec dominating;
};

// G^N(t_k, s_l) and R^N(t_k) for coordinates i < d and columns m < gamma on
// the uniform grid t_k = k T / K.
struct KernelSet {
  std::size_t N = 0;
  std::size_t d = 0;
  std::size_t gamma = 0;
  std::size_t K = 0;
  double T = 0.0;
  std::vector<double> G;  // row kt * d + i, column ks * gamma + m
  std::vector<double> R;  // (kt * d + i) * gamma + m

  double h() const { return T / static_cast<double>(K); }
  double G_at(std::size_t kt, std::size_t ks, std::size_t i, std::size_t m) const {
    return G[(kt * d + i) * (K + 1) * gamma + ks * gamma + m];
  }
  double R_at(std::size_t kt, std::size_t i, std::size_t m) const {
    return R[(kt * d + i) * gamma + m];
  }
};

KernelSet build_kernels(const CoefficientSet& c, const LDConfig& ld, std::size_t N, double T,
                        std::size_t K, std::size_t d);

// Largest entrywise gap over the common coordinates and columns.
double kernel_gap(const KernelSet& a, const KernelSet& b);

struct QQuantities {
  double q1 = 0.0;
  double q2 = 0.0;
};

QQuantities q_quantities(const CoefficientSet& c, const LDConfig& ld, std::size_t N);

// Number of nonzero columns of aC + aP must stay below exp(gamma(N)).
bool growth_ok(const CoefficientSet& c, const LDConfig& ld, std::size_t N);

// Atom times must sit on the kernel grid.
double H_m(const KernelSet& k, const AtomicMeasure& theta, std::size_t m, std::size_t r_index);

// (1/gamma) sum_m int_0^T Psi_m(H_m(theta, r)) dr, trapezoid in r.
double lambda_at(const KernelSet& k, std::span<const LevySpec> specs, const AtomicMeasure& theta);

struct CesaroResult {
  std::vector<std::size_t> N;
  std::vector<double> averages;
  double lambda = 0.0;
  double cauchy_gap = 0.0;
};

// specs_of(N) lists the column specs used at stage N (at least gamma(N)).
CesaroResult lambda_cesaro(std::span<const KernelSet> kernels,
                           const std::function<std::vector<LevySpec>(std::size_t)>& specs_of,
                           const LDConfig& ld, const AtomicMeasure& theta);

struct LegendreProbe {
  double value = 0.0;
  AtomicMeasure theta;
};

// Lower bound on the Legendre transform at x (given at the atom positions of
// support) by coordinate ascent over the atom weights.
LegendreProbe lambda_star_probe(const KernelSet& k, std::span<const LevySpec> specs,
                                const AtomicMeasure& support,
                                const std::vector<std::vector<double>>& x, int sweeps = 4);

struct TailPoint {
  std::size_t N = 0;
  std::size_t gamma = 0;
  std::size_t exceedances = 0;
  std::size_t paths = 0;
  double p_hat = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double normalized_log = 0.0;
  bool below_floor = false;
};

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.96);

using ModelFamily = std::function<std::pair<CoefficientSet, NoiseModel>(std::size_t N)>;

std::vector<TailPoint> tail_slope(const ModelFamily& family, const std::vector<std::size_t>& N_grid,
                                  const LDConfig& ld, double eps, const SimConfig& sim,
                                  std::size_t d);

}  // namespace pmfnet
