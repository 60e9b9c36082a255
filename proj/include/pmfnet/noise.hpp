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
#include <boost/random/normal_distribution.hpp>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmfnet/sparse_matrix.hpp"

namespace pmfnet {

struct JumpAtom {
  double size;
  double prob;
};

// Brownian part plus a compensated compound-Poisson part with finitely many
// jump sizes.
struct LevySpec {
  double brownian_var = 0.0;
  double jump_rate = 0.0;
  std::vector<JumpAtom> atoms;

  double variance() const;
  double jump_variance() const;
  // lambda * sum p z, subtracted per unit time to keep the mean at zero.
  double compensator() const;
  bool has_jumps() const { return jump_rate > 0.0 && !atoms.empty(); }
  void validate(const std::string& where) const;
};

double psi(const LevySpec& spec, double u);

// Brownian variance and per-atom jump intensity both maximized over specs.
LevySpec dominating_spec(std::span<const LevySpec> specs);
bool is_dominated_by(const LevySpec& spec, const LevySpec& dominating, double tol = 1e-12);

// b(t) = offset + amplitude * sin(omega * t + phase), optionally perturbed
// by a white-in-time term with pointwise variance white_var.
struct DriftDensity {
  double offset = 0.0;
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  double white_var = 0.0;

  static DriftDensity constant(double v, double white_var = 0.0) {
    return {v, 0.0, 0.0, 0.0, white_var};
  }
  bool is_constant() const { return amplitude == 0.0 || omega == 0.0; }
  double mean_at(double t) const;
  // sup over [0, T] of E[b(t)]^2 + Var b(t), evaluated at endpoints and
  // interior critical points.
  double sup_second_moment(double T) const;
};

struct NoiseModel {
  std::vector<LevySpec> L;
  SparseMatrix L_cov;
  std::vector<LevySpec> M;
  std::vector<DriftDensity> b;
  std::vector<double> x0_mean;
  SparseMatrix x0_cov;

  std::size_t n() const { return L.size(); }
  std::size_t m() const { return M.size(); }

  // Off-diagonal entries are mirrored; diagonals come from the specs.
  static NoiseModel make(std::vector<LevySpec> L, const std::vector<Entry>& L_offdiag,
                         std::vector<LevySpec> M, std::vector<DriftDensity> b,
                         std::vector<double> x0_mean, const std::vector<double>& x0_var,
                         const std::vector<Entry>& x0_offdiag);
  // Independent zero noise with deterministic X(0).
  static NoiseModel quiet(std::size_t n, std::size_t m, std::vector<double> x0_mean);

  void validate() const;
  std::vector<double> M_variances() const;
  std::vector<double> b_white_variances() const;
  std::vector<double> x0_variances() const;
  std::vector<double> L_variances() const;
};

std::vector<double> uniform_grid(double T, std::size_t steps);

// Precomputed factorizations shared by all path streams.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseModel& model);

  const NoiseModel& model() const { return *model_; }
  bool correlated_L() const { return !L_factor_.empty(); }
  bool correlated_x0() const { return !x0_factor_.empty(); }

 private:
  friend class PathStream;
  const NoiseModel* model_;
  std::vector<double> L_factor_;   // dense n x n, empty when diagonal
  std::vector<double> x0_factor_;  // dense n x n, empty when diagonal
  std::vector<double> L_bstd_;     // per-particle Brownian std
  std::vector<double> x0_std_;
  std::vector<double> M_bstd_;
  std::vector<double> b_std_;
};

// Per-path random stream; draw order is X(0), then per step L, M, b.
class PathStream {
 public:
  PathStream(const NoiseSampler& sampler, std::uint64_t seed, std::uint64_t path_index);

  void initial(double* x0);
  // b_noise receives the zero-mean part of b on this step.
  void step(double dt, double* dL, double* dM, double* b_noise);

 private:
  void levy_increment(const LevySpec& spec, double bstd, double sqrt_dt, double dt, double& out);

  const NoiseSampler* s_;
  std::mt19937_64 rng_;
  boost::random::normal_distribution<double> normal_;  // ziggurat
  std::vector<double> z_;
};

struct NoisePath {
  std::vector<double> grid;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> x0;
  std::vector<double> dL;       // steps x n
  std::vector<double> dM;       // steps x m
  std::vector<double> b_noise;  // steps x m

  std::string to_csv() const;
};

NoisePath sample_path(const NoiseModel& model, std::span<const double> grid,
                      std::uint64_t seed, std::uint64_t path_index);

void check_grid(std::span<const double> grid);

}  // namespace pmfnet
