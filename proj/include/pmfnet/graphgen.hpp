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
#include <random>
#include <utility>
#include <vector>

#include "pmfnet/network.hpp"

namespace pmfnet {

struct PAParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta_in = 0.0;
  double delta_out = 0.0;
  // Vertices 0..n(0)-1 must all appear in the initial edges.
  std::vector<std::pair<std::size_t, std::size_t>> initial_edges{{0, 0}};

  void validate() const;
  std::size_t nu0() const { return initial_edges.size(); }
  std::size_t n0_active() const;
  double in_exponent() const;
  double out_exponent() const;
};

// Prefix sums over a growable weight array; O(log n) update and search.
class FenwickTree {
 public:
  void push_back(double w);
  void add(std::size_t i, double dw);
  double total() const { return total_; }
  std::size_t size() const { return tree_.size(); }
  // Smallest index whose inclusive prefix sum exceeds u, for u in [0, total).
  std::size_t find(double u) const;
  double prefix(std::size_t count) const;

 private:
  std::vector<double> tree_;  // 1-based layout stored 0-based
  double total_ = 0.0;
};

struct HistoryPoint {
  std::size_t N;
  std::size_t M_in;
  std::size_t M_out;
  std::size_t n_active;
};

enum class Branch { Alpha, Beta, Gamma };
enum class DegreeKind { In, Out };

class PAGraph {
 public:
  explicit PAGraph(const PAParams& params, bool keep_edges = true);

  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& in_deg() const { return in_deg_; }
  const std::vector<std::size_t>& out_deg() const { return out_deg_; }
  std::size_t n_active() const { return in_deg_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::size_t steps() const { return steps_; }
  std::size_t M_in() const { return M_in_; }
  std::size_t M_out() const { return M_out_; }
  const std::vector<HistoryPoint>& history() const { return history_; }

  // Exact mass functions of the vertex draws in the current state.
  std::vector<double> in_mass() const;
  std::vector<double> out_mass() const;

 private:
  friend Branch pa_step(PAGraph&, const PAParams&, std::mt19937_64&);
  std::size_t add_vertex();
  void add_edge(std::size_t v, std::size_t w);

  double delta_in_, delta_out_;
  bool keep_edges_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::size_t> in_deg_, out_deg_;
  FenwickTree in_w_, out_w_;
  std::size_t edge_count_ = 0, steps_ = 0, M_in_ = 0, M_out_ = 0;
  std::vector<HistoryPoint> history_;
};

Branch pa_step(PAGraph& g, const PAParams& params, std::mt19937_64& rng);

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

PAGraph pa_generate(const PAParams& params, std::size_t N, std::uint64_t seed,
                    bool keep_edges = true);

struct NormalizerSeq {
  DegreeKind kind;
  double k;
  std::vector<double> values;
};

// c(N+1) = c(N) S(N) / (S(N) + s k), S(N) = nu + N + delta n(N); needs the
// per-step history.
NormalizerSeq normalizers(const PAParams& params, const std::vector<HistoryPoint>& history,
                          DegreeKind kind, double k);

struct ExponentFit {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::vector<double> per_seed;
};

// Least-squares slope of log M vs log N per seed, averaged, with a seed
// bootstrap interval.
ExponentFit fit_exponent(const std::vector<std::vector<HistoryPoint>>& histories,
                         const std::vector<std::size_t>& N_grid, DegreeKind kind);

struct ProbeResult {
  std::vector<std::size_t> N_grid;
  std::vector<std::vector<double>> trajectories;  // per seed, per grid point
  std::vector<double> fluctuation;                // per seed, top half of the grid
};

ProbeResult convergence_probe(const PAParams& params, const std::vector<std::size_t>& N_grid,
                              const std::vector<std::uint64_t>& seeds, DegreeKind kind);

struct WeightRule {
  double phi = 1.0;
  double R_A = 1.0;
};

// Edge i -> j becomes a_ij += multiplicity * phi / R_A, in aP for periphery
// columns off the diagonal and in aC otherwise.
CoefficientSet graph_to_coefficients(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                     const CorePeripheryLayout& layout, const WeightRule& rule);

}  // namespace pmfnet
