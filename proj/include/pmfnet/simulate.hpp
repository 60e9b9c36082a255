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

#include <cstdint>
#include <span>
#include <vector>

#include "pmfnet/network.hpp"
#include "pmfnet/noise.hpp"

namespace pmfnet {

struct SimConfig {
  double T = 1.0;
  std::size_t steps = 100;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  std::size_t record_stride = 0;
  unsigned threads = 0;  // 0: OpenMP default
};

struct MeanCurve {
  std::size_t n = 0;
  std::vector<double> grid;
  std::vector<double> values;  // (K+1) x n

  std::span<const double> at(std::size_t k) const { return {values.data() + k * n, n}; }
};

// RK4 for m' = (aC + aP) m + (fC + fP) E[b(t)], m(0) = E[X(0)].
MeanCurve solve_mean_curve(const CoefficientSet& c, const NoiseModel& noise,
                           std::span<const double> grid);

// Single Euler-Maruyama steps. b holds the realized drift density on the
// step; Eb its expectation.
void step_ips(std::span<double> x, const CoefficientSet& c, std::span<const double> dL,
              std::span<const double> dM, std::span<const double> b, double dt);
void step_pmfs(std::span<double> xbar, std::span<const double> mean, const CoefficientSet& c,
               std::span<const double> dL, std::span<const double> dM,
               std::span<const double> b, std::span<const double> Eb, double dt);

struct PairTrajectory {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<double> X;     // times x n
  std::vector<double> Xbar;  // times x n
  std::vector<double> mean;  // times x n
  bool flagged = false;

  std::string to_csv() const;
};

PairTrajectory simulate_pair(const CoefficientSet& c, const NoiseModel& noise,
                             const SimConfig& sim, std::uint64_t path_index);

struct ErrorEstimate {
  double delta_hat = 0.0;
  double std_err = 0.0;
  std::vector<double> per_particle;
  std::size_t n_paths_used = 0;
  std::size_t n_flagged = 0;
  std::vector<double> xbar_mean_T;
  std::vector<double> xbar_var_T;
};

ErrorEstimate estimate_error(const CoefficientSet& c, const NoiseModel& noise,
                             const SimConfig& sim);

// Per path: max over grid times and the first d particles of |X_i - Xbar_i|.
// Non-finite paths yield NaN.
std::vector<double> coupled_sup_samples(const CoefficientSet& c, const NoiseModel& noise,
                                        const SimConfig& sim, std::size_t d);

}  // namespace pmfnet
