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

#include "pmfnet/graphgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "pmfnet/error.hpp"

namespace pmfnet {

void PAParams::validate() const {
  for (double p : {alpha, beta, gamma}) {
    if (!(p >= 0.0) || p > 1.0) throw ConfigError("alpha, beta, gamma must lie in [0, 1]");
  }
  if (std::fabs(alpha + beta + gamma - 1.0) > 1e-12) {
    throw ConfigError("alpha + beta + gamma must equal 1");
  }
  if (!(delta_in >= 0.0) || !(delta_out >= 0.0) || !std::isfinite(delta_in) ||
      !std::isfinite(delta_out)) {
    throw ConfigError("delta_in and delta_out must be finite and >= 0");
  }
  if (initial_edges.empty()) throw ConfigError("initial graph needs at least one edge");
  const std::size_t n0 = n0_active();
  std::vector<char> seen(n0, 0);
  for (auto [v, w] : initial_edges) seen[v] = seen[w] = 1;
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ConfigError("initial vertices must be 0..n(0)-1 without isolated vertices");
  }
}

std::size_t PAParams::n0_active() const {
  std::size_t n = 0;
  for (auto [v, w] : initial_edges) n = std::max({n, v + 1, w + 1});
  return n;
}

double PAParams::in_exponent() const { return (alpha + beta) / (1.0 + delta_in * (alpha + gamma)); }
double PAParams::out_exponent() const { return (beta + gamma) / (1.0 + delta_out * (alpha + gamma)); }

void FenwickTree::push_back(double w) {
  const std::size_t k = tree_.size() + 1;
  const std::size_t low = k & (~k + 1);
  tree_.push_back(w + prefix(k - 1) - prefix(k - low));
  total_ += w;
}

void FenwickTree::add(std::size_t i, double dw) {
  for (std::size_t k = i + 1; k <= tree_.size(); k += k & (~k + 1)) tree_[k - 1] += dw;
  total_ += dw;
}

double FenwickTree::prefix(std::size_t count) const {
  double s = 0.0;
  for (std::size_t k = count; k > 0; k -= k & (~k + 1)) s += tree_[k - 1];
  return s;
}

std::size_t FenwickTree::find(double u) const {
  std::size_t pos = 0;
  double rem = u;
  for (std::size_t step = std::bit_floor(std::max<std::size_t>(tree_.size(), 1)); step > 0; step >>= 1) {
    if (pos + step <= tree_.size() && tree_[pos + step - 1] <= rem) {
      pos += step;
      rem -= tree_[pos - 1];
    }
  }
  return std::min(pos, tree_.size() - 1);
}

PAGraph::PAGraph(const PAParams& params, bool keep_edges)
    : delta_in_(params.delta_in), delta_out_(params.delta_out), keep_edges_(keep_edges) {
  params.validate();
  const std::size_t n0 = params.n0_active();
  for (std::size_t i = 0; i < n0; ++i) add_vertex();
  for (auto [v, w] : params.initial_edges) add_edge(v, w);
  history_.push_back({0, M_in_, M_out_, n_active()});
}

std::size_t PAGraph::add_vertex() {
  in_deg_.push_back(0);
  out_deg_.push_back(0);
  in_w_.push_back(delta_in_);
  out_w_.push_back(delta_out_);
  return in_deg_.size() - 1;
}

void PAGraph::add_edge(std::size_t v, std::size_t w) {
  if (keep_edges_) edges_.emplace_back(v, w);
  ++edge_count_;
  ++out_deg_[v];
  ++in_deg_[w];
  out_w_.add(v, 1.0);
  in_w_.add(w, 1.0);
  M_out_ = std::max(M_out_, out_deg_[v]);
  M_in_ = std::max(M_in_, in_deg_[w]);
}

std::vector<double> PAGraph::in_mass() const {
  std::vector<double> p(in_deg_.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tot += p[i] = static_cast<double>(in_deg_[i]) + delta_in_;
  for (auto& x : p) x /= tot;
  return p;
}

std::vector<double> PAGraph::out_mass() const {
  std::vector<double> p(out_deg_.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tot += p[i] = static_cast<double>(out_deg_[i]) + delta_out_;
  for (auto& x : p) x /= tot;
  return p;
}

Branch pa_step(PAGraph& g, const PAParams& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double u = U(rng);
  auto draw = [&](const FenwickTree& t) { return t.find(U(rng) * t.total()); };
  Branch br;
  if (u < params.alpha) {
    br = Branch::Alpha;
    const std::size_t w = draw(g.in_w_);
    const std::size_t v = g.add_vertex();
    g.add_edge(v, w);
  } else if (u < params.alpha + params.beta) {
    br = Branch::Beta;
    const std::size_t v = draw(g.out_w_);
    const std::size_t w = draw(g.in_w_);
    g.add_edge(v, w);
  } else {
    br = Branch::Gamma;
    const std::size_t v = draw(g.out_w_);
    const std::size_t w = g.add_vertex();
    g.add_edge(v, w);
  }
  ++g.steps_;
  g.history_.push_back({g.steps_, g.M_in_, g.M_out_, g.n_active()});
  return br;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x67726166u};
  return std::mt19937_64(seq);
}

PAGraph pa_generate(const PAParams& params, std::size_t N, std::uint64_t seed, bool keep_edges) {
  PAGraph g(params, keep_edges);
  auto rng = make_rng(seed);
  for (std::size_t k = 0; k < N; ++k) pa_step(g, params, rng);
  return g;
}

NormalizerSeq normalizers(const PAParams& params, const std::vector<HistoryPoint>& history,
                          DegreeKind kind, double k) {
  if (history.empty()) throw PreconditionError("normalizers need a degree history");
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].N != i) throw PreconditionError("normalizers need the per-step history");
  }
  NormalizerSeq seq{kind, k, {}};
  const double s = kind == DegreeKind::In ? params.alpha + params.beta : params.beta + params.gamma;
  const double delta = kind == DegreeKind::In ? params.delta_in : params.delta_out;
  const double nu = static_cast<double>(params.nu0());
  seq.values.resize(history.size());
  seq.values[0] = 1.0;
  for (std::size_t N = 0; N + 1 < history.size(); ++N) {
    const double S = nu + static_cast<double>(N) + delta * static_cast<double>(history[N].n_active);
    seq.values[N + 1] = seq.values[N] * (S / (S + s * k));
  }
  return seq;
}

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

ExponentFit fit_exponent(const std::vector<std::vector<HistoryPoint>>& histories,
                         const std::vector<std::size_t>& N_grid, DegreeKind kind) {
  if (N_grid.size() < 3) throw PreconditionError("exponent fit needs at least 3 grid points");
  if (histories.size() < 10) throw PreconditionError("exponent fit needs at least 10 seeds");
  for (std::size_t i = 0; i < N_grid.size(); ++i) {
    if (N_grid[i] == 0 || (i > 0 && N_grid[i] <= N_grid[i - 1])) {
      throw PreconditionError("exponent grid must be positive and strictly increasing");
    }
  }
  ExponentFit fit;
  std::vector<double> x;
  for (auto N : N_grid) x.push_back(std::log(static_cast<double>(N)));
  for (const auto& h : histories) {
    std::vector<double> y;
    for (auto N : N_grid) {
      auto it = std::lower_bound(h.begin(), h.end(), N,
                                 [](const HistoryPoint& p, std::size_t n) { return p.N < n; });
      if (it == h.end() || it->N != N) throw PreconditionError("history does not cover the grid");
      const auto M = kind == DegreeKind::In ? it->M_in : it->M_out;
      y.push_back(std::log(static_cast<double>(M)));
    }
    fit.per_seed.push_back(ls_slope(x, y));
  }
  const double S = static_cast<double>(fit.per_seed.size());
  fit.slope = std::accumulate(fit.per_seed.begin(), fit.per_seed.end(), 0.0) / S;
  if (std::all_of(fit.per_seed.begin(), fit.per_seed.end(),
                  [&](double v) { return v == fit.per_seed[0]; })) {
    fit.ci_lo = fit.ci_hi = fit.slope;
    return fit;
  }
  auto rng = make_rng(0x626f6f74u);
  std::uniform_int_distribution<std::size_t> pick(0, fit.per_seed.size() - 1);
  std::vector<double> means(2000);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < fit.per_seed.size(); ++k) s += fit.per_seed[pick(rng)];
    m = s / S;
  }
  std::sort(means.begin(), means.end());
  fit.ci_lo = means[49];
  fit.ci_hi = means[1949];
  return fit;
}

ProbeResult convergence_probe(const PAParams& params, const std::vector<std::size_t>& N_grid,
                              const std::vector<std::uint64_t>& seeds, DegreeKind kind) {
  if (N_grid.empty()) throw PreconditionError("probe grid is empty");
  ProbeResult out;
  out.N_grid = N_grid;
  const double delta = kind == DegreeKind::In ? params.delta_in : params.delta_out;
  for (auto seed : seeds) {
    PAGraph g = pa_generate(params, N_grid.back(), seed, false);
    const auto c = normalizers(params, g.history(), kind, 1.0);
    std::vector<double> traj;
    for (auto N : N_grid) {
      const auto& h = g.history()[N];
      const auto M = kind == DegreeKind::In ? h.M_in : h.M_out;
      traj.push_back(c.values[N] * (static_cast<double>(M) + delta));
    }
    const std::size_t half = traj.size() / 2;
    const auto [lo, hi] = std::minmax_element(traj.begin() + static_cast<std::ptrdiff_t>(half), traj.end());
    const double mean = std::accumulate(traj.begin() + static_cast<std::ptrdiff_t>(half), traj.end(), 0.0) /
                        static_cast<double>(traj.size() - half);
    out.fluctuation.push_back(mean > 0.0 ? (*hi - *lo) / mean : 0.0);
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

CoefficientSet graph_to_coefficients(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                     const CorePeripheryLayout& layout, const WeightRule& rule) {
  if (!(rule.R_A > 0.0)) throw ConfigError("R_A must be > 0");
  const std::size_t n = layout.n();
  std::map<std::pair<std::size_t, std::size_t>, double> mult;
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) {
      throw LayoutError("edge " + std::to_string(i) + "->" + std::to_string(j) +
                        " leaves the particle range 0.." + std::to_string(n - 1));
    }
    mult[{i, j}] += 1.0;
  }
  std::vector<Entry> core, periph;
  for (const auto& [ij, k] : mult) {
    const auto [i, j] = ij;
    const double v = k * rule.phi / rule.R_A;
    if (i == j || layout.is_core(j)) {
      core.push_back({i, j, v});
    } else {
      periph.push_back({i, j, v});
    }
  }
  const std::size_t m = layout.n00 + n;
  return build_coefficients(n, m,
                            {{Role::aC, SparseMatrix::from_entries(n, n, std::move(core))},
                             {Role::aP, SparseMatrix::from_entries(n, n, std::move(periph))}});
}

}  // namespace pmfnet
