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

#include "pmfnet/noise.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "pmfnet/error.hpp"
#include "text.hpp"

namespace pmfnet {

double LevySpec::jump_variance() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * a.size * a.size;
  return jump_rate * s;
}

double LevySpec::variance() const { return brownian_var + jump_variance(); }

double LevySpec::compensator() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * a.size;
  return jump_rate * s;
}

void LevySpec::validate(const std::string& where) const {
  if (!(brownian_var >= 0.0) || !std::isfinite(brownian_var)) {
    throw ConfigError(where + ": brownian_var must be finite and >= 0");
  }
  if (!(jump_rate >= 0.0) || !std::isfinite(jump_rate)) {
    throw ConfigError(where + ": jump rate must be finite and >= 0");
  }
  if (atoms.empty()) return;
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.prob >= 0.0) || !std::isfinite(a.size)) {
      throw ConfigError(where + ": jump atoms need finite sizes and probabilities >= 0");
    }
    total += a.prob;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    throw ConfigError(where + ": jump probabilities must sum to 1");
  }
}

double psi(const LevySpec& spec, double u) {
  double s = 0.5 * spec.brownian_var * u * u;
  double j = 0.0;
  for (const auto& a : spec.atoms) {
    const double x = u * a.size;
    j += a.prob * (std::expm1(x) - x);
  }
  return s + spec.jump_rate * j;
}

LevySpec dominating_spec(std::span<const LevySpec> specs) {
  if (specs.size() == 1) return specs[0];
  LevySpec out;
  std::vector<double> sizes;
  std::vector<double> weight;
  for (const auto& s : specs) {
    out.brownian_var = std::max(out.brownian_var, s.brownian_var);
    for (const auto& a : s.atoms) {
      const double w = s.jump_rate * a.prob;
      auto it = std::find(sizes.begin(), sizes.end(), a.size);
      if (it == sizes.end()) {
        sizes.push_back(a.size);
        weight.push_back(w);
      } else {
        auto k = static_cast<std::size_t>(it - sizes.begin());
        weight[k] = std::max(weight[k], w);
      }
    }
  }
  double rate = 0.0;
  for (double w : weight) rate += w;
  if (rate > 0.0) {
    out.jump_rate = rate;
    for (std::size_t k = 0; k < sizes.size(); ++k) out.atoms.push_back({sizes[k], weight[k] / rate});
  }
  return out;
}

bool is_dominated_by(const LevySpec& spec, const LevySpec& dominating, double tol) {
  if (spec.brownian_var > dominating.brownian_var * (1.0 + tol) + tol) return false;
  for (const auto& a : spec.atoms) {
    const double w = spec.jump_rate * a.prob;
    if (w == 0.0) continue;
    double wd = 0.0;
    for (const auto& d : dominating.atoms) {
      if (d.size == a.size) wd += dominating.jump_rate * d.prob;
    }
    if (w > wd * (1.0 + tol) + tol) return false;
  }
  return true;
}

double DriftDensity::mean_at(double t) const {
  if (amplitude == 0.0) return offset;
  return offset + amplitude * std::sin(omega * t + phase);
}

double DriftDensity::sup_second_moment(double T) const {
  double best = std::max(std::fabs(mean_at(0.0)), std::fabs(mean_at(T)));
  if (!is_constant()) {
    const double pi = std::numbers::pi;
    double lo = phase, hi = omega * T + phase;
    if (lo > hi) std::swap(lo, hi);
    // sin hits +-1 at pi/2 + k pi
    const double k0 = std::ceil((lo - pi / 2) / pi);
    if (pi / 2 + k0 * pi <= hi) {
      best = std::max(best, std::fabs(offset) + std::fabs(amplitude));
    }
  }
  return best * best + white_var;
}

namespace {

std::vector<Entry> symmetric_with_diagonal(std::size_t n, const std::vector<Entry>& offdiag,
                                           const std::vector<double>& diag,
                                           const std::string& what) {
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  for (const auto& e : offdiag) {
    if (e.row >= n || e.col >= n) throw ConfigError(what + ": index out of range");
    if (e.row == e.col) throw ConfigError(what + ": diagonal comes from the marginal specs");
    auto key = std::minmax(e.row, e.col);
    auto it = cells.find(key);
    if (it != cells.end() && it->second != e.value) {
      throw ConfigError(what + ": asymmetric entries at (" + std::to_string(e.row) + "," +
                        std::to_string(e.col) + ")");
    }
    cells[key] = e.value;
  }
  std::vector<Entry> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i, i, diag[i]});
  for (const auto& [k, v] : cells) {
    out.push_back({k.first, k.second, v});
    out.push_back({k.second, k.first, v});
  }
  return out;
}

// Symmetric square root; empty result when the matrix is diagonal.
std::vector<double> psd_root(const SparseMatrix& cov, std::span<const double> diag,
                             const std::string& what) {
  const std::size_t n = cov.rows();
  if (cov.is_diagonal()) return {};
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& e : cov.entries()) {
    c(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
  }
  for (std::size_t i = 0; i < n; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const auto& lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam.minCoeff() < -1e-10 * scale) {
    throw PreconditionError(what + " is not positive semidefinite (min eigenvalue " +
                            detail::num(lam.minCoeff()) + ")");
  }
  Eigen::VectorXd root = lam.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd f = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

}  // namespace

NoiseModel NoiseModel::make(std::vector<LevySpec> L, const std::vector<Entry>& L_offdiag,
                            std::vector<LevySpec> M, std::vector<DriftDensity> b,
                            std::vector<double> x0_mean, const std::vector<double>& x0_var,
                            const std::vector<Entry>& x0_offdiag) {
  NoiseModel nm;
  const std::size_t n = L.size();
  if (x0_mean.size() != n || x0_var.size() != n) {
    throw ConfigError("initial law needs one mean and variance per particle");
  }
  if (b.size() != M.size()) throw ConfigError("drift densities need one entry per noise column");
  std::vector<double> lvar(n);
  for (std::size_t i = 0; i < n; ++i) lvar[i] = L[i].variance();
  nm.L_cov = SparseMatrix::from_entries(n, n, symmetric_with_diagonal(n, L_offdiag, lvar, "L covariance"));
  nm.x0_cov = SparseMatrix::from_entries(n, n, symmetric_with_diagonal(n, x0_offdiag, x0_var, "X(0) covariance"));
  nm.L = std::move(L);
  nm.M = std::move(M);
  nm.b = std::move(b);
  nm.x0_mean = std::move(x0_mean);
  nm.validate();
  return nm;
}

NoiseModel NoiseModel::quiet(std::size_t n, std::size_t m, std::vector<double> x0_mean) {
  return make(std::vector<LevySpec>(n), {}, std::vector<LevySpec>(m),
              std::vector<DriftDensity>(m), std::move(x0_mean), std::vector<double>(n, 0.0), {});
}

void NoiseModel::validate() const {
  const std::size_t n = L.size();
  if (L_cov.rows() != n || L_cov.cols() != n || x0_cov.rows() != n || x0_cov.cols() != n ||
      x0_mean.size() != n) {
    throw ConfigError("noise model dimensions are inconsistent");
  }
  if (b.size() != M.size()) throw ConfigError("drift densities need one entry per noise column");
  for (std::size_t i = 0; i < n; ++i) L[i].validate("L[" + std::to_string(i) + "]");
  for (std::size_t j = 0; j < M.size(); ++j) M[j].validate("M[" + std::to_string(j) + "]");
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto& d = b[j];
    if (!std::isfinite(d.offset) || !std::isfinite(d.amplitude) || !std::isfinite(d.omega) ||
        !std::isfinite(d.phase) || !(d.white_var >= 0.0) || !std::isfinite(d.white_var)) {
      throw ConfigError("b[" + std::to_string(j) + "] lacks finite second moments");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x0_mean[i]) || !(x0_cov.at(i, i) >= 0.0)) {
      throw ConfigError("X(0)[" + std::to_string(i) + "] lacks finite second moments");
    }
    if (std::fabs(L_cov.at(i, i) - L[i].variance()) > 1e-12 * std::max(1.0, L[i].variance())) {
      throw ConfigError("L covariance diagonal does not match the L specs");
    }
  }
  if (!(L_cov.transpose() == L_cov) || !(x0_cov.transpose() == x0_cov)) {
    throw ConfigError("covariance matrices must be symmetric");
  }
}

std::vector<double> NoiseModel::M_variances() const {
  std::vector<double> v(M.size());
  for (std::size_t j = 0; j < M.size(); ++j) v[j] = M[j].variance();
  return v;
}

std::vector<double> NoiseModel::b_white_variances() const {
  std::vector<double> v(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) v[j] = b[j].white_var;
  return v;
}

std::vector<double> NoiseModel::x0_variances() const { return x0_cov.diagonal_values(); }

std::vector<double> NoiseModel::L_variances() const {
  std::vector<double> v(L.size());
  for (std::size_t i = 0; i < L.size(); ++i) v[i] = L[i].variance();
  return v;
}

std::vector<double> uniform_grid(double T, std::size_t steps) {
  if (!(T > 0.0) || steps == 0) throw PreconditionError("grid needs T > 0 and at least one step");
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = T * static_cast<double>(k) / static_cast<double>(steps);
  return g;
}

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw PreconditionError("grid needs at least two points");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw PreconditionError("grid must be strictly increasing");
  }
}

NoiseSampler::NoiseSampler(const NoiseModel& model) : model_(&model) {
  model.validate();
  const std::size_t n = model.n();
  std::vector<double> bvar(n);
  for (std::size_t i = 0; i < n; ++i) bvar[i] = model.L[i].brownian_var;
  // only the Brownian parts of L can carry cross-correlation
  L_factor_ = psd_root(model.L_cov, bvar, "L covariance (Brownian part)");
  x0_factor_ = psd_root(model.x0_cov, model.x0_variances(), "X(0) covariance");
  L_bstd_.resize(n);
  x0_std_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    L_bstd_[i] = std::sqrt(bvar[i]);
    x0_std_[i] = std::sqrt(model.x0_cov.at(i, i));
  }
  M_bstd_.resize(model.m());
  b_std_.resize(model.m());
  for (std::size_t j = 0; j < model.m(); ++j) {
    M_bstd_[j] = std::sqrt(model.M[j].brownian_var);
    b_std_[j] = std::sqrt(model.b[j].white_var);
  }
}

PathStream::PathStream(const NoiseSampler& sampler, std::uint64_t seed, std::uint64_t path_index)
    : s_(&sampler) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32), 0x706d666eu};
  rng_.seed(seq);
  z_.resize(sampler.model().n());
}

void PathStream::initial(double* x0) {
  const auto& m = s_->model();
  const std::size_t n = m.n();
  if (s_->correlated_x0()) {
    for (std::size_t i = 0; i < n; ++i) z_[i] = normal_(rng_);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += s_->x0_factor_[i * n + j] * z_[j];
      x0[i] = m.x0_mean[i] + acc;
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    x0[i] = m.x0_mean[i];
    if (s_->x0_std_[i] > 0.0) x0[i] += s_->x0_std_[i] * normal_(rng_);
  }
}

void PathStream::levy_increment(const LevySpec& spec, double bstd, double sqrt_dt, double dt,
                                double& out) {
  if (bstd > 0.0) out += bstd * sqrt_dt * normal_(rng_);
  if (!spec.has_jumps()) return;
  for (const auto& a : spec.atoms) {
    const double mean = spec.jump_rate * a.prob * dt;
    if (mean <= 0.0) continue;
    std::poisson_distribution<long> pois(mean);
    out += static_cast<double>(pois(rng_)) * a.size;
  }
  out -= spec.compensator() * dt;
}

void PathStream::step(double dt, double* dL, double* dM, double* b_noise) {
  const auto& m = s_->model();
  const std::size_t n = m.n();
  const double sq = std::sqrt(dt);
  if (s_->correlated_L()) {
    for (std::size_t i = 0; i < n; ++i) z_[i] = normal_(rng_);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += s_->L_factor_[i * n + j] * z_[j];
      dL[i] = acc * sq;
    }
    for (std::size_t i = 0; i < n; ++i) levy_increment(m.L[i], 0.0, sq, dt, dL[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      dL[i] = 0.0;
      levy_increment(m.L[i], s_->L_bstd_[i], sq, dt, dL[i]);
    }
  }
  for (std::size_t j = 0; j < m.m(); ++j) {
    dM[j] = 0.0;
    levy_increment(m.M[j], s_->M_bstd_[j], sq, dt, dM[j]);
  }
  for (std::size_t j = 0; j < m.m(); ++j) {
    b_noise[j] = s_->b_std_[j] > 0.0 ? s_->b_std_[j] * normal_(rng_) : 0.0;
  }
}

NoisePath sample_path(const NoiseModel& model, std::span<const double> grid, std::uint64_t seed,
                      std::uint64_t path_index) {
  check_grid(grid);
  NoiseSampler sampler(model);
  PathStream stream(sampler, seed, path_index);
  NoisePath p;
  p.grid.assign(grid.begin(), grid.end());
  p.n = model.n();
  p.m = model.m();
  const std::size_t K = grid.size() - 1;
  p.x0.resize(p.n);
  p.dL.resize(K * p.n);
  p.dM.resize(K * p.m);
  p.b_noise.resize(K * p.m);
  stream.initial(p.x0.data());
  for (std::size_t k = 0; k < K; ++k) {
    stream.step(grid[k + 1] - grid[k], p.dL.data() + k * p.n, p.dM.data() + k * p.m,
                p.b_noise.data() + k * p.m);
  }
  return p;
}

std::string NoisePath::to_csv() const {
  std::ostringstream os;
  os << "step,index,dL,dM\n";
  const std::size_t K = grid.empty() ? 0 : grid.size() - 1;
  const std::size_t w = std::max(n, m);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < w; ++i) {
      os << k << ',' << i << ',';
      if (i < n) os << detail::num(dL[k * n + i]);
      os << ',';
      if (i < m) os << detail::num(dM[k * m + i]);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace pmfnet
