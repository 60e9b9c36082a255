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

#include <array>
#include <string>
#include <vector>

#include "pmfnet/network.hpp"
#include "pmfnet/noise.hpp"

namespace pmfnet {

using RateVector = std::array<double, 12>;

RateVector compute_rates(const CoefficientSet& c, const NoiseModel& noise, double T);

struct Constants {
  double K = 0.0;
  std::array<double, 12> K_iota{};
  double E_T = 0.0;
  double V_T = 0.0;
  bool overflow = false;
};

Constants compute_constants(const VQuantities& v, double T);

struct RateReport {
  RateVector r{};
  VQuantities v;
  double K = 0.0;
  std::array<double, 12> K_iota{};
  double E_T = 0.0;
  double V_T = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  double T = 0.0;
};

// K * sum K_i r_i, summed in index order.
double assemble_bound(double K, const std::array<double, 12>& K_iota, const RateVector& r);

RateReport error_bound(const CoefficientSet& c, const NoiseModel& noise, double T);

struct ChaosRates {
  double r_a = 0.0;
  double r_sigma = 0.0;
  double r_f = 0.0;
  double r_rhoM = 0.0;
};

ChaosRates chaos_rates(const CoefficientSet& c, const NoiseModel& noise, double T);

struct ChaosInequality {
  int index;  // 1..12
  double lhs;
  double rhs;
  bool equality;
  std::string rhs_expression;
  bool holds;
};

// Requires diagonal core matrices and independent noises across particles.
std::vector<ChaosInequality> chaos_inequalities(const CoefficientSet& c, const NoiseModel& noise,
                                                double T);

struct SparsityReport {
  std::size_t p_L = 0, p_A1 = 0, p_Sigma = 0, p_A2 = 0, p_f = 0, p_rho = 0;
  double R_A = 0.0, R_Sigma = 0.0;
  double phi_sup = 0.0, psi_sup = 0.0;
};

SparsityReport sparsity_report(const CoefficientSet& c, const CorePeripheryLayout& layout,
                               const NoiseModel& noise, double R_A, double R_Sigma);

}  // namespace pmfnet
