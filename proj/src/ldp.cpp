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

#include "pmfnet/ldp.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pmfnet/error.hpp"

namespace pmfnet {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

double norm1(const Eigen::MatrixXd& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().colwise().sum().maxCoeff();
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A) {
  if (!A.allFinite()) throw NumericError("matrix exponential of a non-finite matrix");
  const Eigen::Index n = A.rows();
  int s = 0;
  const double nrm = norm1(A);
  while (std::ldexp(nrm, -s) > 0.5) ++s;
  const Eigen::MatrixXd B = A * std::ldexp(1.0, -s);
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = term * B / static_cast<double>(k);
    E += term;
    if (norm1(term) <= 1e-18 * norm1(E)) break;
  }
  for (int k = 0; k < s; ++k) E = E * E;
  if (!E.allFinite()) throw NumericError("matrix exponential overflow");
  return E;
}

Eigen::MatrixXd to_dense(const SparseMatrix& A) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(idx(A.rows()), idx(A.cols()));
  for (const auto& e : A.entries()) D(idx(e.row), idx(e.col)) = e.value;
  return D;
}

Eigen::MatrixXd matrix_exponential_apply(const SparseMatrix& A, double t, const Eigen::MatrixXd& V) {
  if (A.rows() != A.cols() || static_cast<std::size_t>(V.rows()) != A.cols()) {
    throw PreconditionError("matrix_exponential_apply: dimension mismatch");
  }
  if (!std::isfinite(t)) throw PreconditionError("matrix_exponential_apply: t must be finite");
  return matrix_exponential(to_dense(A) * t) * V;
}

double AtomicMeasure::total_variation() const {
  double s = 0.0;
  for (const auto& c : coords) {
    for (const auto& a : c) s += std::fabs(a.weight);
  }
  return s;
}

void AtomicMeasure::validate() const {
  for (const auto& c : coords) {
    for (const auto& a : c) {
      if (!(a.time >= 0.0 && a.time <= T) || !std::isfinite(a.weight)) {
        throw PreconditionError("atoms need times in [0, T] and finite weights");
      }
    }
  }
}

AtomicMeasure AtomicMeasure::scaled(double s) const {
  AtomicMeasure out = *this;
  for (auto& c : out.coords) {
    for (auto& a : c) a.weight *= s;
  }
  return out;
}

AtomicMeasure combine(const AtomicMeasure& a, double s, const AtomicMeasure& b, double t) {
  if (a.coords.size() != b.coords.size()) throw PreconditionError("measures differ in dimension");
  AtomicMeasure out = a;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    if (a.coords[i].size() != b.coords[i].size()) throw PreconditionError("atom positions differ");
    for (std::size_t j = 0; j < a.coords[i].size(); ++j) {
      if (a.coords[i][j].time != b.coords[i][j].time) throw PreconditionError("atom positions differ");
      out.coords[i][j].weight = s * a.coords[i][j].weight + t * b.coords[i][j].weight;
    }
  }
  return out;
}

KernelSet build_kernels(const CoefficientSet& c, const LDConfig& ld, std::size_t N, double T,
                        std::size_t K, std::size_t d) {
  if (!c.sC.empty() || !c.sP.empty()) {
    throw PreconditionError("kernels need zero volatility matrices (sC = sP = 0)");
  }
  if (!(T > 0.0) || K == 0) throw PreconditionError("kernel grid needs T > 0 and K >= 1");
  KernelSet ks;
  ks.N = N;
  ks.K = K;
  ks.T = T;
  ks.d = std::min(d, c.n);
  const std::size_t g_scale = ld.gamma_of_N(N);
  ks.gamma = std::min(g_scale, c.m);
  const std::size_t n = c.n, dd = ks.d, gm = ks.gamma, K1 = K + 1;
  const double h = ks.h();
  const Eigen::MatrixXd a = to_dense(c.aC + c.aP);
  const Eigen::MatrixXd aC = to_dense(c.aC);
  const Eigen::MatrixXd aP = to_dense(c.aP);
  const Eigen::MatrixXd rC = to_dense(c.rC).leftCols(idx(gm));
  const Eigen::MatrixXd rP = to_dense(c.rP).leftCols(idx(gm));
  const Eigen::MatrixXd Eh = matrix_exponential(a * h);
  const Eigen::MatrixXd EhC = matrix_exponential(aC * h);

  // rows k*d .. k*d+d-1 hold the first d rows of e^{a t_k}
  Eigen::MatrixXd P(idx(K1 * dd), idx(n));
  Eigen::MatrixXd row = Eigen::MatrixXd::Identity(idx(n), idx(n)).topRows(idx(dd));
  // columns l*gamma .. hold aP e^{aC s_l} rC
  Eigen::MatrixXd U(idx(n), idx(K1 * gm));
  Eigen::MatrixXd W = rC;
  for (std::size_t k = 0; k < K1; ++k) {
    if (k > 0) {
      row = row * Eh;
      W = EhC * W;
    }
    P.middleRows(idx(k * dd), idx(dd)) = row;
    U.middleCols(idx(k * gm), idx(gm)) = aP * W;
  }
  const double gs = static_cast<double>(g_scale);
  RowMatrix G = gs * (P * U);
  RowMatrix R = gs * (P * rP);
  if (!G.allFinite() || !R.allFinite()) throw NumericError("kernel tabulation overflow");
  ks.G.assign(G.data(), G.data() + G.size());
  ks.R.assign(R.data(), R.data() + R.size());
  return ks;
}

double kernel_gap(const KernelSet& a, const KernelSet& b) {
  if (a.K != b.K || a.T != b.T) throw PreconditionError("kernel grids differ");
  const std::size_t d = std::min(a.d, b.d), g = std::min(a.gamma, b.gamma);
  double gap = 0.0;
  for (std::size_t kt = 0; kt <= a.K; ++kt) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t m = 0; m < g; ++m) {
        gap = std::max(gap, std::fabs(a.R_at(kt, i, m) - b.R_at(kt, i, m)));
        for (std::size_t ks = 0; ks <= a.K; ++ks) {
          gap = std::max(gap, std::fabs(a.G_at(kt, ks, i, m) - b.G_at(kt, ks, i, m)));
        }
      }
    }
  }
  return gap;
}

QQuantities q_quantities(const CoefficientSet& c, const LDConfig& ld, std::size_t N) {
  const double g = static_cast<double>(ld.gamma_of_N(N));
  QQuantities q;
  const SparseMatrix AP = c.aP.abs();
  q.q1 = g * (AP * c.aC.abs().off_diagonal()).max_abs_row_sum();
  double best = 0.0;
  for (const auto& e : (AP * c.rC.abs()).entries()) best = std::max(best, std::fabs(e.value));
  q.q2 = g * best;
  return q;
}

bool growth_ok(const CoefficientSet& c, const LDConfig& ld, std::size_t N) {
  std::set<std::size_t> cols;
  for (const auto& e : c.aC.entries()) cols.insert(e.col);
  for (const auto& e : c.aP.entries()) cols.insert(e.col);
  return std::log(static_cast<double>(std::max<std::size_t>(cols.size(), 1))) <=
         static_cast<double>(ld.gamma_of_N(N));
}

namespace {

struct GridAtom {
  std::size_t coord;
  std::size_t k;
  double w;
};

std::vector<GridAtom> resolve_atoms(const KernelSet& ks, const AtomicMeasure& theta) {
  theta.validate();
  if (theta.coords.size() > ks.d) {
    throw PreconditionError("measure has more coordinates than the kernels observe");
  }
  if (std::fabs(theta.T - ks.T) > 1e-12 * ks.T) throw PreconditionError("measure and kernel horizons differ");
  std::vector<GridAtom> out;
  const double h = ks.h();
  for (std::size_t i = 0; i < theta.coords.size(); ++i) {
    for (const auto& a : theta.coords[i]) {
      const double pos = a.time / h;
      const double k = std::round(pos);
      if (std::fabs(pos - k) > 1e-9 * std::max(1.0, pos)) {
        throw PreconditionError("atom time is not on the kernel grid");
      }
      out.push_back({i, static_cast<std::size_t>(k), a.weight});
    }
  }
  return out;
}

double H_resolved(const KernelSet& ks, const std::vector<GridAtom>& atoms, std::size_t m,
                  std::size_t kr) {
  const double h = ks.h();
  double s = 0.0;
  for (const auto& a : atoms) {
    if (a.k < kr) continue;
    double inner = 0.0;
    if (a.k > kr) {
      const std::size_t span = a.k - kr;
      inner = 0.5 * (ks.G_at(span, 0, a.coord, m) + ks.G_at(0, span, a.coord, m));
      for (std::size_t l = kr + 1; l < a.k; ++l) inner += ks.G_at(a.k - l, l - kr, a.coord, m);
      inner *= h;
    }
    s += a.w * (inner + ks.R_at(a.k - kr, a.coord, m));
  }
  return s;
}

}  // namespace

double H_m(const KernelSet& k, const AtomicMeasure& theta, std::size_t m, std::size_t r_index) {
  if (m >= k.gamma || r_index > k.K) throw PreconditionError("H_m: index out of range");
  return H_resolved(k, resolve_atoms(k, theta), m, r_index);
}

double lambda_at(const KernelSet& k, std::span<const LevySpec> specs, const AtomicMeasure& theta) {
  if (specs.size() < k.gamma) throw PreconditionError("fewer noise specs than kernel columns");
  const auto atoms = resolve_atoms(k, theta);
  std::vector<double> per_m(k.gamma, 0.0);
  const long G = static_cast<long>(k.gamma);
#pragma omp parallel for schedule(static)
  for (long mm = 0; mm < G; ++mm) {
    const auto m = static_cast<std::size_t>(mm);
    double acc = 0.0;
    for (std::size_t kr = 0; kr <= k.K; ++kr) {
      const double f = psi(specs[m], H_resolved(k, atoms, m, kr));
      acc += (kr == 0 || kr == k.K) ? 0.5 * f : f;
    }
    per_m[m] = acc * k.h();
  }
  double total = 0.0;
  for (double v : per_m) total += v;
  return k.gamma == 0 ? 0.0 : total / static_cast<double>(k.gamma);
}

CesaroResult lambda_cesaro(std::span<const KernelSet> kernels,
                           const std::function<std::vector<LevySpec>(std::size_t)>& specs_of,
                           const LDConfig& ld, const AtomicMeasure& theta) {
  CesaroResult out;
  for (std::size_t q = 0; q < kernels.size(); ++q) {
    const auto& k = kernels[q];
    if (q > 0 && k.N <= kernels[q - 1].N) throw PreconditionError("N grid must be strictly increasing");
    const auto specs = specs_of(k.N);
    for (std::size_t m = 0; m < std::min(specs.size(), k.gamma); ++m) {
      if (!is_dominated_by(specs[m], ld.dominating)) {
        throw PreconditionError("noise column " + std::to_string(m) +
                                " is not dominated by the reference Levy process");
      }
    }
    out.N.push_back(k.N);
    out.averages.push_back(lambda_at(k, specs, theta));
  }
  if (!out.averages.empty()) out.lambda = out.averages.back();
  if (out.averages.size() > 1) {
    out.cauchy_gap = std::fabs(out.averages.back() - out.averages[out.averages.size() - 2]);
  }
  return out;
}

LegendreProbe lambda_star_probe(const KernelSet& k, std::span<const LevySpec> specs,
                                const AtomicMeasure& support,
                                const std::vector<std::vector<double>>& x, int sweeps) {
  if (x.size() != support.coords.size()) throw PreconditionError("x must match the atom layout");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != support.coords[i].size()) throw PreconditionError("x must match the atom layout");
  }
  AtomicMeasure th = support;
  for (auto& c : th.coords) {
    for (auto& a : c) a.weight = 0.0;
  }
  auto objective = [&](const AtomicMeasure& m) {
    double pair = 0.0;
    for (std::size_t i = 0; i < m.coords.size(); ++i) {
      for (std::size_t j = 0; j < m.coords[i].size(); ++j) pair += m.coords[i][j].weight * x[i][j];
    }
    return pair - lambda_at(k, specs, m);
  };
  double best = objective(th);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < th.coords.size(); ++i) {
      for (std::size_t j = 0; j < th.coords[i].size(); ++j) {
        const double w0 = th.coords[i][j].weight;
        auto at = [&](double w) {
          th.coords[i][j].weight = w;
          return objective(th);
        };
        double lo = w0 - 8.0, hi = w0 + 8.0;
        double c1 = hi - phi * (hi - lo), c2 = lo + phi * (hi - lo);
        double f1 = at(c1), f2 = at(c2);
        for (int it = 0; it < 60; ++it) {
          if (f1 < f2) {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + phi * (hi - lo);
            f2 = at(c2);
          } else {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - phi * (hi - lo);
            f1 = at(c1);
          }
        }
        const double wc = 0.5 * (lo + hi);
        const double fc = at(wc);
        if (fc > best) {
          best = fc;
          th.coords[i][j].weight = wc;
        } else {
          th.coords[i][j].weight = w0;
        }
      }
    }
  }
  return {best, th};
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  if (k == 0) return {0.0, std::min(1.0, centre + half)};
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<TailPoint> tail_slope(const ModelFamily& family, const std::vector<std::size_t>& N_grid,
                                  const LDConfig& ld, double eps, const SimConfig& sim,
                                  std::size_t d) {
  if (!(eps >= 0.0)) throw PreconditionError("tail level must be >= 0");
  std::vector<TailPoint> out;
  for (auto N : N_grid) {
    auto [c, noise] = family(N);
    const auto samples = coupled_sup_samples(c, noise, sim, d);
    TailPoint tp;
    tp.N = N;
    tp.gamma = ld.gamma_of_N(N);
    for (double s : samples) {
      if (std::isnan(s)) continue;
      ++tp.paths;
      // level 0 counts every path, including exact couplings
      if (s > eps || eps == 0.0) ++tp.exceedances;
    }
    tp.p_hat = tp.paths ? static_cast<double>(tp.exceedances) / static_cast<double>(tp.paths) : 0.0;
    std::tie(tp.wilson_lo, tp.wilson_hi) = wilson_interval(tp.exceedances, tp.paths);
    tp.below_floor = tp.exceedances < 10;
    tp.normalized_log = tp.exceedances > 0 ? std::log(tp.p_hat) / static_cast<double>(tp.gamma)
                                           : -std::numeric_limits<double>::infinity();
    out.push_back(tp);
  }
  return out;
}

}  // namespace pmfnet
