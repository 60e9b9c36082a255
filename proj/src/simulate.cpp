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

// Per-chunk products must not fan out into nested threads.
#define EIGEN_DONT_PARALLELIZE
#include "pmfnet/simulate.hpp"

#include <omp.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <sstream>

#include "pmfnet/error.hpp"
#include "text.hpp"

namespace pmfnet {

namespace {

constexpr std::size_t kBatch = 32;

// x += (A + AP) dt + (V + VP) . dL + (F + FP) dt + R + RP, entrywise over an
// n x w block. IPS and PMFS both go through here so that identical inputs
// give identical bits.
void apply_update(double* x, const double* A, const double* AP, const double* V,
                  const double* VP, const double* F, const double* FP, const double* R,
                  const double* RP, const double* dL, double dt, std::size_t len) {
  for (std::size_t k = 0; k < len; ++k) {
    x[k] = x[k] + (A[k] + AP[k]) * dt + (V[k] + VP[k]) * dL[k] + (F[k] + FP[k]) * dt + R[k] + RP[k];
  }
}

void broadcast(const double* v, std::size_t n, std::size_t w, double* out) {
  for (std::size_t i = 0; i < n; ++i) std::fill(out + i * w, out + (i + 1) * w, v[i]);
}

void mat_into(const SparseMatrix& a, const double* x, double* y, std::size_t w) {
  if (a.empty()) {
    std::fill(y, y + a.rows() * w, 0.0);
  } else {
    a.multiply(x, y, w);
  }
}

// Products against n x w blocks; dense storage once a block is mostly full.
class MatKernel {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  MatKernel() = default;
  explicit MatKernel(const SparseMatrix& a) : a_(&a) {
    const double cells = static_cast<double>(a.rows()) * static_cast<double>(a.cols());
    if (cells >= 4096.0 && static_cast<double>(a.nnz()) >= 0.25 * cells) {
      dense_ = RowMatrix::Zero(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
      for (const auto& e : a.entries()) {
        dense_(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
      }
      use_dense_ = true;
    }
  }

  void into(const double* x, double* y, std::size_t w) const {
    if (!use_dense_) {
      mat_into(*a_, x, y, w);
      return;
    }
    const auto W = static_cast<Eigen::Index>(w);
    Eigen::Map<const RowMatrix> X(x, dense_.cols(), W);
    Eigen::Map<RowMatrix> Y(y, dense_.rows(), W);
    Y.noalias() = dense_ * X;
  }

 private:
  const SparseMatrix* a_ = nullptr;
  RowMatrix dense_;
  bool use_dense_ = false;
};

struct BatchOut {
  std::vector<double> runmax;  // n x w
  std::vector<unsigned char> ok;
  std::vector<double> X;
  std::vector<double> Xbar;
};

using StepObserver = std::function<void(std::size_t k, const double* X, const double* Xb, std::size_t w)>;

class PairEngine {
 public:
  PairEngine(const CoefficientSet& c, const NoiseModel& noise, std::span<const double> grid,
             std::uint64_t seed)
      : c_(c), noise_(noise), sampler_(noise), grid_(grid.begin(), grid.end()), seed_(seed),
        mean_(solve_mean_curve(c, noise, grid)), aC_(c.aC), aP_(c.aP), sC_(c.sC), sP_(c.sP),
        fC_(c.fC), fP_(c.fP), rC_(c.rC), rP_(c.rP) {
    n_ = c.n;
    m_ = c.m;
    K_ = grid_.size() - 1;
    b_random_ = std::any_of(noise.b.begin(), noise.b.end(),
                            [](const DriftDensity& d) { return d.white_var > 0.0; });
    Eb_.resize(K_ * m_);
    aPm_.assign(K_ * n_, 0.0);
    sPm_.assign(K_ * n_, 0.0);
    fPEb_.assign(K_ * n_, 0.0);
    fCEb_.assign(K_ * n_, 0.0);
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t j = 0; j < m_; ++j) Eb_[k * m_ + j] = noise.b[j].mean_at(grid_[k]);
      const double* mk = mean_.values.data() + k * n_;
      mat_into(c.aP, mk, aPm_.data() + k * n_, 1);
      mat_into(c.sP, mk, sPm_.data() + k * n_, 1);
      mat_into(c.fP, Eb_.data() + k * m_, fPEb_.data() + k * n_, 1);
      mat_into(c.fC, Eb_.data() + k * m_, fCEb_.data() + k * n_, 1);
    }
  }

  std::size_t steps() const { return K_; }

  BatchOut run(std::size_t first, std::size_t w, const StepObserver& obs = {}) const {
    const std::size_t nw = n_ * w, mw = m_ * w;
    std::vector<double> X(nw), Xb(nw), rm(nw, 0.0);
    std::vector<double> A(nw), AP(nw), V(nw), VP(nw), F(nw), FP(nw), R(nw), RP(nw);
    std::vector<double> Ab(nw), Vb(nw), APb(nw), VPb(nw), FPb(nw), zero(nw, 0.0);
    std::vector<double> dL(nw), dM(mw), bB(mw), bn(mw);
    std::vector<double> tL(n_), tM(m_), tb(m_), tx(n_);
    std::vector<PathStream> streams;
    streams.reserve(w);
    for (std::size_t p = 0; p < w; ++p) streams.emplace_back(sampler_, seed_, first + p);
    for (std::size_t p = 0; p < w; ++p) {
      streams[p].initial(tx.data());
      for (std::size_t i = 0; i < n_; ++i) X[i * w + p] = tx[i];
    }
    Xb = X;
    std::vector<unsigned char> ok(w, 1);
    if (obs) obs(0, X.data(), Xb.data(), w);
    for (std::size_t k = 0; k < K_; ++k) {
      const double dt = grid_[k + 1] - grid_[k];
      for (std::size_t p = 0; p < w; ++p) {
        streams[p].step(dt, tL.data(), tM.data(), tb.data());
        for (std::size_t i = 0; i < n_; ++i) dL[i * w + p] = tL[i];
        for (std::size_t j = 0; j < m_; ++j) {
          dM[j * w + p] = tM[j];
          bn[j * w + p] = tb[j];
        }
      }
      // shared pieces: f^C b and rho^C dM enter both systems identically
      if (b_random_) {
        for (std::size_t j = 0; j < m_; ++j) {
          const double e = Eb_[k * m_ + j];
          for (std::size_t p = 0; p < w; ++p) bB[j * w + p] = e + bn[j * w + p];
        }
        fC_.into(bB.data(), F.data(), w);
        fP_.into(bB.data(), FP.data(), w);
      } else {
        broadcast(fCEb_.data() + k * n_, n_, w, F.data());
        broadcast(fPEb_.data() + k * n_, n_, w, FP.data());
      }
      rC_.into(dM.data(), R.data(), w);
      rP_.into(dM.data(), RP.data(), w);

      aC_.into(X.data(), A.data(), w);
      aP_.into(X.data(), AP.data(), w);
      sC_.into(X.data(), V.data(), w);
      sP_.into(X.data(), VP.data(), w);

      aC_.into(Xb.data(), Ab.data(), w);
      sC_.into(Xb.data(), Vb.data(), w);
      broadcast(aPm_.data() + k * n_, n_, w, APb.data());
      broadcast(sPm_.data() + k * n_, n_, w, VPb.data());
      broadcast(fPEb_.data() + k * n_, n_, w, FPb.data());

      apply_update(X.data(), A.data(), AP.data(), V.data(), VP.data(), F.data(), FP.data(),
                   R.data(), RP.data(), dL.data(), dt, nw);
      apply_update(Xb.data(), Ab.data(), APb.data(), Vb.data(), VPb.data(), F.data(), FPb.data(),
                   R.data(), zero.data(), dL.data(), dt, nw);

      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t p = 0; p < w; ++p) {
          const double d = std::fabs(X[i * w + p] - Xb[i * w + p]);
          ok[p] &= static_cast<unsigned char>(d <= DBL_MAX);
          rm[i * w + p] = std::max(rm[i * w + p], d);
        }
      }
      if (obs) obs(k + 1, X.data(), Xb.data(), w);
    }
    return {std::move(rm), std::move(ok), std::move(X), std::move(Xb)};
  }

 private:
  const CoefficientSet& c_;
  const NoiseModel& noise_;
  NoiseSampler sampler_;
  std::vector<double> grid_;
  std::uint64_t seed_;
  MeanCurve mean_;
  MatKernel aC_, aP_, sC_, sP_, fC_, fP_, rC_, rP_;
  std::size_t n_ = 0, m_ = 0, K_ = 0;
  bool b_random_ = false;
  std::vector<double> Eb_, aPm_, sPm_, fPEb_, fCEb_;
};

void check_sim(const SimConfig& sim) {
  if (!(sim.T > 0.0) || !std::isfinite(sim.T)) throw PreconditionError("horizon T must be > 0");
  if (sim.steps < 1) throw PreconditionError("steps must be >= 1");
  if (sim.n_paths < 1) throw PreconditionError("n_paths must be >= 1");
}

int thread_count(unsigned requested) {
  return requested > 0 ? static_cast<int>(requested) : omp_get_max_threads();
}

struct Chunk {
  std::size_t first;
  std::size_t count;
  std::size_t group;
};

// Paths are cut into batches of equal width (only the last may be short) and
// the batches into at most 64 contiguous jackknife groups; the split depends
// on n_paths only.
std::vector<Chunk> make_chunks(std::size_t n_paths, std::size_t& n_groups) {
  const std::size_t bw = std::clamp<std::size_t>(n_paths / 64, 1, kBatch);
  const std::size_t nb = (n_paths + bw - 1) / bw;
  n_groups = std::min<std::size_t>(nb, 64);
  std::vector<Chunk> out;
  for (std::size_t q = 0; q < nb; ++q) {
    const std::size_t first = q * bw;
    out.push_back({first, std::min(bw, n_paths - first), q * n_groups / nb});
  }
  return out;
}

}  // namespace

MeanCurve solve_mean_curve(const CoefficientSet& c, const NoiseModel& noise,
                           std::span<const double> grid) {
  check_grid(grid);
  check_compatible(c, noise);
  const std::size_t n = c.n;
  const SparseMatrix A = c.aC + c.aP;
  const SparseMatrix F = c.fC + c.fP;
  MeanCurve mc;
  mc.n = n;
  mc.grid.assign(grid.begin(), grid.end());
  mc.values.resize(grid.size() * n);
  std::vector<double> eb(c.m), y(noise.x0_mean), k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto rhs = [&](double t, const std::vector<double>& state, std::vector<double>& out) {
    for (std::size_t j = 0; j < c.m; ++j) eb[j] = noise.b[j].mean_at(t);
    std::fill(out.begin(), out.end(), 0.0);
    A.multiply_add(state.data(), out.data(), 1);
    F.multiply_add(eb.data(), out.data(), 1);
  };
  std::copy(y.begin(), y.end(), mc.values.begin());
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k], h = grid[k + 1] - grid[k];
    rhs(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    std::copy(y.begin(), y.end(), mc.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
  }
  return mc;
}

void step_ips(std::span<double> x, const CoefficientSet& c, std::span<const double> dL,
              std::span<const double> dM, std::span<const double> b, double dt) {
  const std::size_t n = c.n;
  if (x.size() != n || dL.size() != n || dM.size() != c.m || b.size() != c.m) {
    throw PreconditionError("step_ips: dimension mismatch");
  }
  std::vector<double> A(n), AP(n), V(n), VP(n), F(n), FP(n), R(n), RP(n);
  mat_into(c.aC, x.data(), A.data(), 1);
  mat_into(c.aP, x.data(), AP.data(), 1);
  mat_into(c.sC, x.data(), V.data(), 1);
  mat_into(c.sP, x.data(), VP.data(), 1);
  mat_into(c.fC, b.data(), F.data(), 1);
  mat_into(c.fP, b.data(), FP.data(), 1);
  mat_into(c.rC, dM.data(), R.data(), 1);
  mat_into(c.rP, dM.data(), RP.data(), 1);
  apply_update(x.data(), A.data(), AP.data(), V.data(), VP.data(), F.data(), FP.data(), R.data(),
               RP.data(), dL.data(), dt, n);
}

void step_pmfs(std::span<double> xbar, std::span<const double> mean, const CoefficientSet& c,
               std::span<const double> dL, std::span<const double> dM,
               std::span<const double> b, std::span<const double> Eb, double dt) {
  const std::size_t n = c.n;
  if (xbar.size() != n || mean.size() != n || dL.size() != n || dM.size() != c.m ||
      b.size() != c.m || Eb.size() != c.m) {
    throw PreconditionError("step_pmfs: dimension mismatch");
  }
  std::vector<double> A(n), AP(n), V(n), VP(n), F(n), FP(n), R(n), RP(n, 0.0);
  mat_into(c.aC, xbar.data(), A.data(), 1);
  mat_into(c.aP, mean.data(), AP.data(), 1);
  mat_into(c.sC, xbar.data(), V.data(), 1);
  mat_into(c.sP, mean.data(), VP.data(), 1);
  mat_into(c.fC, b.data(), F.data(), 1);
  mat_into(c.fP, Eb.data(), FP.data(), 1);
  mat_into(c.rC, dM.data(), R.data(), 1);
  apply_update(xbar.data(), A.data(), AP.data(), V.data(), VP.data(), F.data(), FP.data(),
               R.data(), RP.data(), dL.data(), dt, n);
}

PairTrajectory simulate_pair(const CoefficientSet& c, const NoiseModel& noise,
                             const SimConfig& sim, std::uint64_t path_index) {
  check_sim(sim);
  check_compatible(c, noise);
  const auto grid = uniform_grid(sim.T, sim.steps);
  PairEngine engine(c, noise, grid, sim.seed);
  const MeanCurve mc = solve_mean_curve(c, noise, grid);
  const std::size_t stride = std::max<std::size_t>(sim.record_stride, 1);
  PairTrajectory tr;
  tr.n = c.n;
  auto out = engine.run(path_index, 1, [&](std::size_t k, const double* X, const double* Xb, std::size_t) {
    if (k % stride != 0 && k != sim.steps) return;
    tr.times.push_back(grid[k]);
    tr.X.insert(tr.X.end(), X, X + c.n);
    tr.Xbar.insert(tr.Xbar.end(), Xb, Xb + c.n);
    auto m = mc.at(k);
    tr.mean.insert(tr.mean.end(), m.begin(), m.end());
  });
  tr.flagged = !out.ok[0];
  return tr;
}

std::string PairTrajectory::to_csv() const {
  std::ostringstream os;
  os << "t,particle,X,Xbar,mean\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      os << detail::num(times[k]) << ',' << i << ',' << detail::num(X[k * n + i]) << ','
         << detail::num(Xbar[k * n + i]) << ',' << detail::num(mean[k * n + i]) << '\n';
    }
  }
  return os.str();
}

ErrorEstimate estimate_error(const CoefficientSet& c, const NoiseModel& noise,
                             const SimConfig& sim) {
  check_sim(sim);
  check_compatible(c, noise);
  require_zero_periphery_diagonal(c);
  const auto grid = uniform_grid(sim.T, sim.steps);
  PairEngine engine(c, noise, grid, sim.seed);
  const std::size_t n = c.n;
  std::size_t G = 0;
  const auto chunks = make_chunks(sim.n_paths, G);

  struct Partial {
    std::vector<double> sq, xb, xb2;
    std::size_t used = 0, flagged = 0;
  };
  std::vector<Partial> parts(chunks.size());
  const long nch = static_cast<long>(chunks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(sim.threads))
  for (long q = 0; q < nch; ++q) {
    const auto& ch = chunks[static_cast<std::size_t>(q)];
    auto out = engine.run(ch.first, ch.count);
    Partial& pt = parts[static_cast<std::size_t>(q)];
    pt.sq.assign(n, 0.0);
    pt.xb.assign(n, 0.0);
    pt.xb2.assign(n, 0.0);
    const std::size_t w = ch.count;
    for (std::size_t p = 0; p < w; ++p) {
      if (!out.ok[p]) {
        ++pt.flagged;
        continue;
      }
      ++pt.used;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = out.runmax[i * w + p];
        const double xb = out.Xbar[i * w + p];
        pt.sq[i] += r * r;
        pt.xb[i] += xb;
        pt.xb2[i] += xb * xb;
      }
    }
  }

  ErrorEstimate est;
  std::vector<double> total(n, 0.0), xb(n, 0.0), xb2(n, 0.0);
  std::vector<std::vector<double>> gsum(G, std::vector<double>(n, 0.0));
  std::vector<std::size_t> gcount(G, 0);
  for (std::size_t q = 0; q < chunks.size(); ++q) {
    const auto& pt = parts[q];
    est.n_flagged += pt.flagged;
    est.n_paths_used += pt.used;
    gcount[chunks[q].group] += pt.used;
    for (std::size_t i = 0; i < n; ++i) {
      total[i] += pt.sq[i];
      gsum[chunks[q].group][i] += pt.sq[i];
      xb[i] += pt.xb[i];
      xb2[i] += pt.xb2[i];
    }
  }
  if (static_cast<double>(est.n_flagged) > 0.01 * static_cast<double>(sim.n_paths) ||
      est.n_paths_used == 0) {
    throw NumericError(std::to_string(est.n_flagged) + " of " + std::to_string(sim.n_paths) +
                       " paths became non-finite; the system is too stiff for " +
                       std::to_string(sim.steps) + " steps");
  }
  const double P = static_cast<double>(est.n_paths_used);
  est.per_particle.resize(n);
  est.xbar_mean_T.resize(n);
  est.xbar_var_T.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    est.per_particle[i] = std::sqrt(total[i] / P);
    est.delta_hat = std::max(est.delta_hat, est.per_particle[i]);
    est.xbar_mean_T[i] = xb[i] / P;
    est.xbar_var_T[i] = P > 1 ? std::max(0.0, (xb2[i] - xb[i] * xb[i] / P) / (P - 1.0)) : 0.0;
  }
  // delete-a-group jackknife
  if (G > 1) {
    std::vector<double> theta(G, 0.0);
    double mean = 0.0;
    std::size_t live = 0;
    for (std::size_t g = 0; g < G; ++g) {
      const double rest = P - static_cast<double>(gcount[g]);
      if (rest <= 0.0) continue;
      double th = 0.0;
      for (std::size_t i = 0; i < n; ++i) th = std::max(th, std::sqrt(std::max(0.0, total[i] - gsum[g][i]) / rest));
      theta[g] = th;
      mean += th;
      ++live;
    }
    if (live > 1) {
      mean /= static_cast<double>(live);
      double ss = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        if (P - static_cast<double>(gcount[g]) <= 0.0) continue;
        ss += (theta[g] - mean) * (theta[g] - mean);
      }
      est.std_err = std::sqrt(ss * static_cast<double>(live - 1) / static_cast<double>(live));
    }
  }
  return est;
}

std::vector<double> coupled_sup_samples(const CoefficientSet& c, const NoiseModel& noise,
                                        const SimConfig& sim, std::size_t d) {
  check_sim(sim);
  check_compatible(c, noise);
  require_zero_periphery_diagonal(c);
  d = std::min(d, c.n);
  const auto grid = uniform_grid(sim.T, sim.steps);
  PairEngine engine(c, noise, grid, sim.seed);
  std::size_t G = 0;
  const auto chunks = make_chunks(sim.n_paths, G);
  std::vector<double> out(sim.n_paths, 0.0);
  const long nch = static_cast<long>(chunks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(sim.threads))
  for (long q = 0; q < nch; ++q) {
    const auto& ch = chunks[static_cast<std::size_t>(q)];
    auto r = engine.run(ch.first, ch.count);
    for (std::size_t p = 0; p < ch.count; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s = std::max(s, r.runmax[i * ch.count + p]);
      out[ch.first + p] = r.ok[p] ? s : std::nan("");
    }
  }
  return out;
}

}  // namespace pmfnet
