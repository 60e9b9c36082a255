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

#include "pmfnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "pmfnet/error.hpp"
#include "pmfnet/families.hpp"
#include "pmfnet/graphgen.hpp"
#include "pmfnet/ldp.hpp"
#include "pmfnet/model_io.hpp"
#include "pmfnet/rates.hpp"
#include "pmfnet/simulate.hpp"
#include "text.hpp"

#ifndef PMFNET_VERSION
#define PMFNET_VERSION "0.0.0"
#endif

namespace pmfnet {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"simulate",   "rates",      "certify",
                                                 "chaos-sweep", "pagen",     "pafit",
                                                 "ldp-lambda", "ldp-tail",   "mckean-sweep"};
  return kinds;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs two or more points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw PreconditionError("log-log fit needs positive values");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw ConfigError("spec." + path + ": " + msg);
}

// Typed access with field-path diagnostics.
struct Spec {
  const json& j;
  std::string base;

  bool has(const std::string& k) const { return j.contains(k); }

  double num(const std::string& k, double dflt) const {
    if (!j.contains(k)) return dflt;
    if (!j[k].is_number() || !std::isfinite(j[k].get<double>())) bad(k, "expected a finite number");
    return j[k].get<double>();
  }
  std::size_t count(const std::string& k, std::size_t dflt) const {
    if (!j.contains(k)) return dflt;
    if (!j[k].is_number_integer() || j[k].get<long long>() < 0) bad(k, "expected a nonnegative integer");
    return j[k].get<std::size_t>();
  }
  std::string str(const std::string& k, const std::string& dflt) const {
    if (!j.contains(k)) return dflt;
    if (!j[k].is_string()) bad(k, "expected a string");
    return j[k].get<std::string>();
  }
  std::vector<std::size_t> grid(const std::string& k, std::vector<std::size_t> dflt) const {
    if (!j.contains(k)) return dflt;
    const json& g = j[k];
    if (!g.is_array()) bad(k, "expected an array of counts");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].is_number_integer() || g[i].get<long long>() < 1) {
        bad(k + "[" + std::to_string(i) + "]", "expected a positive integer");
      }
      out.push_back(g[i].get<std::size_t>());
      if (i > 0 && out[i] <= out[i - 1]) bad(k, "must be strictly increasing");
    }
    return out;
  }
  std::string path(const std::string& p) const {
    fs::path fp(p);
    return fp.is_absolute() ? p : (fs::path(base) / fp).string();
  }
};

bool is_seed(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

std::uint64_t master_seed(const json& spec) {
  if (!spec.contains("seed")) return 1;
  if (!is_seed(spec["seed"])) bad("seed", "expected a nonnegative integer");
  return spec["seed"].get<std::uint64_t>();
}

SimConfig sim_config(const json& spec, std::uint64_t seed) {
  SimConfig s;
  s.seed = seed;
  if (!spec.contains("sim")) return s;
  if (!spec["sim"].is_object()) bad("sim", "expected an object");
  Spec sp{spec["sim"], ""};
  try {
    s.T = sp.num("T", s.T);
    s.steps = sp.count("steps", s.steps);
    s.n_paths = sp.count("paths", s.n_paths);
    s.record_stride = sp.count("record_stride", 0);
    s.threads = static_cast<unsigned>(sp.count("threads", 0));
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    throw ConfigError("spec.sim." + msg.substr(5));
  }
  if (!(s.T > 0.0)) bad("sim.T", "must be > 0");
  if (s.steps < 1) bad("sim.steps", "must be >= 1");
  if (s.n_paths < 1) bad("sim.paths", "must be >= 1");
  return s;
}

ModelInstance load_model(const json& spec, const std::string& base) {
  if (!spec.contains("model")) bad("model", "missing (file path or inline model document)");
  const json& m = spec["model"];
  if (m.is_string()) {
    Spec s{spec, base};
    return load_model_file(s.path(m.get<std::string>()));
  }
  return model_from_json(m, "spec.model");
}

json vq_json(const VQuantities& v) {
  return {{"v_a", v.v_a},     {"v_a_d", v.v_a_d}, {"v_sigma", v.v_sigma}, {"v_L", v.v_L},
          {"v_b", v.v_b},     {"v_X", v.v_X},     {"v_f", v.v_f},         {"v_rho_M", v.v_rho_M},
          {"T", v.T}};
}

json report_json(const RateReport& r) {
  return {{"T", r.T},
          {"r", r.r},
          {"v", vq_json(r.v)},
          {"K", r.K},
          {"K_iota", r.K_iota},
          {"E_T", r.E_T},
          {"V_T", r.V_T},
          {"bound", r.bound},
          {"vacuous", r.vacuous}};
}

json chaos_json(const ChaosRates& c) {
  return {{"r_a", c.r_a}, {"r_sigma", c.r_sigma}, {"r_f", c.r_f}, {"r_rhoM", c.r_rhoM}};
}

json estimate_json(const ErrorEstimate& e) {
  return {{"delta_hat", e.delta_hat},       {"std_err", e.std_err},
          {"per_particle", e.per_particle}, {"n_paths_used", e.n_paths_used},
          {"n_flagged", e.n_flagged}};
}

json sim_json(const SimConfig& s) {
  return {{"T", s.T}, {"steps", s.steps}, {"paths", s.n_paths}, {"seed", s.seed}};
}

json violations_json(const std::vector<LayoutViolation>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back({{"matrix", v.matrix}, {"row", v.row}, {"col", v.col}, {"rule", v.rule}});
  return out;
}

json rates_payload(const ModelInstance& mi, double T) {
  const auto& c = mi.coeffs;
  json p = report_json(error_bound(c, mi.noise, T));
  p["chaos"] = chaos_json(chaos_rates(c, mi.noise, T));
  const auto vs = validate_layout(c, mi.layout);
  p["layout_violations"] = violations_json(vs);
  if (vs.empty()) {
    const auto s = sparsity_report(c, mi.layout, mi.noise, mi.R_A, mi.R_Sigma);
    p["sparsity"] = {{"p_L", s.p_L},     {"p_A1", s.p_A1},       {"p_Sigma", s.p_Sigma},
                     {"p_A2", s.p_A2},   {"p_f", s.p_f},         {"p_rho", s.p_rho},
                     {"R_A", s.R_A},     {"R_Sigma", s.R_Sigma}, {"phi_sup", s.phi_sup},
                     {"psi_sup", s.psi_sup}};
  } else {
    p["sparsity"] = nullptr;
  }
  return p;
}

void run_simulate(const json& spec, const std::string& base, ResultEnvelope& env) {
  const ModelInstance mi = load_model(spec, base);
  const SimConfig sim = sim_config(spec, env.seed);
  const ErrorEstimate est = estimate_error(mi.coeffs, mi.noise, sim);
  json p = estimate_json(est);
  p["n"] = mi.coeffs.n;
  p["m"] = mi.coeffs.m;
  p["sim"] = sim_json(sim);
  env.payload = p;
  Spec s{spec, base};
  const std::size_t traces = std::min(s.count("traces", 0), sim.n_paths);
  for (std::size_t k = 0; k < traces; ++k) {
    env.files.emplace_back("trace_" + std::to_string(k) + ".csv",
                           simulate_pair(mi.coeffs, mi.noise, sim, k).to_csv());
  }
  const std::size_t noise_paths = std::min(s.count("noise_paths", 0), sim.n_paths);
  const auto grid = uniform_grid(sim.T, sim.steps);
  for (std::size_t k = 0; k < noise_paths; ++k) {
    env.files.emplace_back("noise_" + std::to_string(k) + ".csv",
                           sample_path(mi.noise, grid, sim.seed, k).to_csv());
  }
}

void run_rates(const json& spec, const std::string& base, ResultEnvelope& env) {
  const ModelInstance mi = load_model(spec, base);
  const double T = Spec{spec, base}.num("T", sim_config(spec, env.seed).T);
  if (!(T > 0.0)) bad("T", "must be > 0");
  env.payload = rates_payload(mi, T);
}

void run_certify(const json& spec, const std::string& base, ResultEnvelope& env) {
  const ModelInstance mi = load_model(spec, base);
  const SimConfig sim = sim_config(spec, env.seed);
  const RateReport rep = error_bound(mi.coeffs, mi.noise, sim.T);
  const ErrorEstimate est = estimate_error(mi.coeffs, mi.noise, sim);
  const double upper = est.delta_hat + 3.0 * est.std_err;
  // optional user target on top of the error bound
  const double tol = Spec{spec, base}.num("tolerance", INFINITY);
  if (!(tol > 0.0)) bad("tolerance", "must be > 0");
  std::string verdict;
  if (upper > tol) {
    verdict = "FAIL";
  } else if (rep.vacuous) {
    verdict = "VACUOUS";
  } else {
    verdict = upper <= rep.bound ? "PASS" : "FAIL";
  }
  env.payload = {{"verdict", verdict},
                 {"delta_hat", est.delta_hat},
                 {"std_err", est.std_err},
                 {"upper", upper},
                 {"bound", rep.bound},
                 {"report", report_json(rep)},
                 {"estimate", estimate_json(est)},
                 {"sim", sim_json(sim)}};
  if (std::isfinite(tol)) env.payload["tolerance"] = tol;
  if (verdict == "FAIL") env.exit_code = 3;
}

void run_chaos_sweep(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  const std::string family = s.str("family", "classex");
  const auto grid = s.grid("N_grid", {25, 50, 100, 200});
  const double T = s.num("T", 1.0);
  if (!(T > 0.0)) bad("T", "must be > 0");
  json rows = json::array();
  PlotTable tab;
  tab.name = "rate_vs_N";
  tab.columns.push_back({"N", "network size index"});
  for (int k = 1; k <= 12; ++k) tab.columns.push_back({"r" + std::to_string(k), "rate r_" + std::to_string(k)});
  tab.columns.push_back({"bound", "assembled error bound"});
  std::vector<std::vector<double>> per_rate(12);
  std::vector<double> Ns;
  for (auto N : grid) {
    const ModelInstance mi = family_instance(family, N);
    json row = rates_payload(mi, T);
    row["N"] = N;
    try {
      json ineq = json::array();
      for (const auto& q : chaos_inequalities(mi.coeffs, mi.noise, T)) {
        ineq.push_back({{"index", q.index}, {"lhs", q.lhs}, {"rhs", q.rhs}, {"equality", q.equality},
                        {"rhs_expression", q.rhs_expression}, {"holds", q.holds}});
      }
      row["inequalities"] = ineq;
    } catch (const PreconditionError& e) {
      row["inequalities"] = nullptr;
      row["inequalities_skipped"] = e.what();
    }
    std::vector<double> tr{static_cast<double>(N)};
    for (int k = 0; k < 12; ++k) {
      const double r = row["r"][static_cast<std::size_t>(k)].get<double>();
      tr.push_back(r);
      per_rate[static_cast<std::size_t>(k)].push_back(r);
    }
    tr.push_back(row["bound"].get<double>());
    tab.rows.push_back(tr);
    Ns.push_back(static_cast<double>(N));
    rows.push_back(row);
  }
  json slopes = json::array();
  for (const auto& r : per_rate) {
    const bool ok = r.size() >= 2 && std::all_of(r.begin(), r.end(), [](double v) { return v > 0.0; });
    slopes.push_back(ok ? json(loglog_slope(Ns, r)) : json(nullptr));
  }
  env.payload = {{"family", family}, {"T", T}, {"rows", rows}, {"slopes", slopes}};
  env.tables.push_back(std::move(tab));
}

PAParams pa_params(const json& spec) {
  if (!spec.contains("pa") || !spec["pa"].is_object()) bad("pa", "missing preferential attachment parameters");
  const json& j = spec["pa"];
  Spec s{j, ""};
  PAParams p;
  try {
    p.alpha = s.num("alpha", 0.0);
    p.beta = s.num("beta", 0.0);
    p.gamma = s.num("gamma", 0.0);
    p.delta_in = s.num("delta_in", 0.0);
    p.delta_out = s.num("delta_out", 0.0);
  } catch (const ConfigError& e) {
    throw ConfigError("spec.pa." + std::string(e.what()).substr(5));
  }
  if (j.contains("initial_edges")) {
    const json& e = j["initial_edges"];
    if (!e.is_array() || e.empty()) bad("pa.initial_edges", "expected a nonempty array of [src, dst]");
    p.initial_edges.clear();
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (!e[k].is_array() || e[k].size() != 2 || !e[k][0].is_number_unsigned() || !e[k][1].is_number_unsigned()) {
        bad("pa.initial_edges[" + std::to_string(k) + "]", "expected [src, dst]");
      }
      p.initial_edges.emplace_back(e[k][0].get<std::size_t>(), e[k][1].get<std::size_t>());
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    bad("pa", e.what());
  }
  return p;
}

json params_json(const PAParams& p) {
  json edges = json::array();
  for (auto [a, b] : p.initial_edges) edges.push_back(json::array({a, b}));
  return {{"alpha", p.alpha},         {"beta", p.beta},           {"gamma", p.gamma},
          {"delta_in", p.delta_in},   {"delta_out", p.delta_out}, {"initial_edges", edges}};
}

std::vector<std::uint64_t> seed_list(const json& spec, std::uint64_t master, std::size_t dflt) {
  if (spec.contains("seeds")) {
    const json& s = spec["seeds"];
    if (!s.is_array() || s.empty()) bad("seeds", "expected a nonempty array of seeds");
    std::vector<std::uint64_t> out;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!is_seed(s[k])) bad("seeds[" + std::to_string(k) + "]", "expected a nonnegative integer");
      out.push_back(s[k].get<std::uint64_t>());
    }
    return out;
  }
  const std::size_t n = Spec{spec, ""}.count("n_seeds", dflt);
  std::vector<std::uint64_t> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = master + k;
  return out;
}

void run_pagen(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  const PAParams p = pa_params(spec);
  const std::size_t N = s.count("N", 1000);
  const PAGraph g = pa_generate(p, N, env.seed, true);
  const auto cin = normalizers(p, g.history(), DegreeKind::In, 1.0);
  const auto cout = normalizers(p, g.history(), DegreeKind::Out, 1.0);
  std::ostringstream edges;
  edges << "step,src,dst\n";
  const std::size_t nu = p.nu0();
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    edges << (k < nu ? 0 : k - nu + 1) << ',' << g.edges()[k].first << ',' << g.edges()[k].second << '\n';
  }
  std::ostringstream hist;
  hist << "N,M_in,M_out,n,c_in,c_out\n";
  PlotTable tab;
  tab.name = "degree_vs_N";
  tab.columns = {{"N", "steps taken"},
                 {"M_in", "maximum in-degree"},
                 {"M_out", "maximum out-degree"},
                 {"n_active", "non-isolated vertices"},
                 {"sum_deg", "sum of in-degrees (edges)"},
                 {"c_in", "in-degree normalizer c(N,1)"},
                 {"c_out", "out-degree normalizer c(N,1)"}};
  for (const auto& h : g.history()) {
    hist << h.N << ',' << h.M_in << ',' << h.M_out << ',' << h.n_active << ',' << detail::num(cin.values[h.N])
         << ',' << detail::num(cout.values[h.N]) << '\n';
    tab.rows.push_back({static_cast<double>(h.N), static_cast<double>(h.M_in), static_cast<double>(h.M_out),
                        static_cast<double>(h.n_active), static_cast<double>(nu + h.N), cin.values[h.N],
                        cout.values[h.N]});
  }
  env.files.emplace_back("edges.csv", edges.str());
  env.files.emplace_back("history.csv", hist.str());
  env.tables.push_back(std::move(tab));
  env.payload = {{"params", params_json(p)},
                 {"N", N},
                 {"seed", env.seed},
                 {"n_active", g.n_active()},
                 {"edge_count", g.edge_count()},
                 {"M_in", g.M_in()},
                 {"M_out", g.M_out()},
                 {"c_in", cin.values.back()},
                 {"c_out", cout.values.back()},
                 {"in_exponent", p.in_exponent()},
                 {"out_exponent", p.out_exponent()}};
}

std::vector<HistoryPoint> read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open history");
  std::string line;
  std::getline(in, line);
  if (line.rfind("N,M_in,M_out,n", 0) != 0) throw ConfigError(path + ":1: expected header N,M_in,M_out,n,...");
  std::vector<HistoryPoint> h;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t v[4];
    for (auto& x : v) {
      if (!std::getline(ls, cell, ',')) throw ConfigError(path + ":" + std::to_string(lineno) + ": too few columns");
      try {
        std::size_t used = 0;
        x = std::stoull(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": '" + cell + "' is not a count");
      }
    }
    if (!h.empty() && v[0] <= h.back().N) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": N must increase");
    }
    h.push_back({v[0], v[1], v[2], v[3]});
  }
  return h;
}

json fit_json(const ExponentFit& f, double predicted) {
  return {{"slope", f.slope}, {"ci_lo", f.ci_lo}, {"ci_hi", f.ci_hi}, {"per_seed", f.per_seed},
          {"predicted", predicted}};
}

void run_pafit(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  std::vector<std::vector<HistoryPoint>> hs;
  std::vector<std::size_t> grid;
  json source;
  double pin = std::nan(""), pout = std::nan("");
  if (spec.contains("histories")) {
    const json& list = spec["histories"];
    if (!list.is_array()) bad("histories", "expected an array of CSV paths");
    for (const auto& f : list) {
      if (!f.is_string()) bad("histories", "expected an array of CSV paths");
      hs.push_back(read_history_csv(s.path(f.get<std::string>())));
    }
    if (hs.empty()) bad("histories", "is empty");
    std::size_t top = hs[0].back().N;
    for (const auto& h : hs) top = std::min(top, h.back().N);
    std::vector<std::size_t> dflt;
    for (std::size_t N = 10; N <= top; N *= 2) dflt.push_back(N);
    grid = s.grid("N_grid", dflt);
    source = {{"histories", list}};
    if (spec.contains("pa")) {
      const PAParams p = pa_params(spec);
      pin = p.in_exponent();
      pout = p.out_exponent();
    }
  } else {
    const PAParams p = pa_params(spec);
    grid = s.grid("N_grid", {1000, 3000, 10000, 30000, 100000});
    const auto seeds = seed_list(spec, env.seed, 20);
    for (auto sd : seeds) hs.push_back(pa_generate(p, grid.back(), sd, false).history());
    source = {{"params", params_json(p)}, {"seeds", seeds}};
    pin = p.in_exponent();
    pout = p.out_exponent();
  }
  env.payload = {{"source", source},
                 {"N_grid", grid},
                 {"in", fit_json(fit_exponent(hs, grid, DegreeKind::In), pin)},
                 {"out", fit_json(fit_exponent(hs, grid, DegreeKind::Out), pout)}};
}

LevySpec levy_from(const json& j, const std::string& path) {
  json doc = {{"n", 1}, {"m", 1}, {"noise", {{"M", json::array({j})}}}};
  try {
    return model_from_json(doc, path).noise.M[0];
  } catch (const ConfigError& e) {
    bad(path, e.what());
  }
}

std::function<std::size_t(std::size_t)> gamma_rule(const json& spec) {
  if (!spec.contains("gamma")) return [](std::size_t N) { return N; };
  const json& g = spec["gamma"];
  if (g.is_string() && g.get<std::string>() == "identity") return [](std::size_t N) { return N; };
  if (!g.is_object()) bad("ld.gamma", "expected \"identity\" or {\"scale\": c, \"power\": p}");
  Spec s{g, ""};
  const double c = s.num("scale", 1.0), pw = s.num("power", 1.0);
  if (!(c > 0.0) || !(pw > 0.0)) bad("ld.gamma", "scale and power must be > 0");
  return [c, pw](std::size_t N) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(c * std::pow(static_cast<double>(N), pw))));
  };
}

AtomicMeasure theta_from(const json& j, double T, const std::string& path) {
  AtomicMeasure th;
  th.T = T;
  if (!j.is_array()) bad(path, "expected one array of [time, weight] atoms per coordinate");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string pi = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array()) bad(pi, "expected an array of [time, weight] atoms");
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      const json& a = j[i][k];
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        bad(pi + "[" + std::to_string(k) + "]", "expected [time, weight]");
      }
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    th.coords.push_back(std::move(atoms));
  }
  try {
    th.validate();
  } catch (const Error& e) {
    bad(path, e.what());
  }
  return th;
}

void run_ldp_lambda(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  const std::string family = s.str("family", "mckean_tail");
  const auto grid = s.grid("N_grid", {10, 20, 40});
  if (grid.empty()) bad("N_grid", "is empty");
  const json ldj = spec.contains("ld") ? spec["ld"] : json::object();
  if (!ldj.is_object()) bad("ld", "expected an object");
  Spec ls{ldj, base};
  const double T = ls.num("T", 1.0);
  const std::size_t K = ls.count("K", 100);
  const std::size_t d = ls.count("d", 4);
  if (!(T > 0.0) || K < 1 || d < 1) bad("ld", "needs T > 0, K >= 1 and d >= 1");
  LDConfig ld;
  ld.gamma_of_N = gamma_rule(ldj);
  std::vector<ModelInstance> models;
  for (auto N : grid) models.push_back(family_instance(family, N));
  if (ldj.contains("dominating")) {
    ld.dominating = levy_from(ldj["dominating"], "ld.dominating");
  } else {
    std::vector<LevySpec> all;
    for (const auto& mi : models) all.insert(all.end(), mi.noise.M.begin(), mi.noise.M.end());
    ld.dominating = dominating_spec(all);
  }
  const AtomicMeasure theta =
      theta_from(ldj.contains("theta") ? ldj["theta"] : json::array({json::array({json::array({T, 1.0})})}), T,
                 "ld.theta");
  std::vector<KernelSet> kernels;
  json rows = json::array();
  std::map<std::size_t, const ModelInstance*> by_N;
  for (std::size_t q = 0; q < grid.size(); ++q) {
    by_N[grid[q]] = &models[q];
    kernels.push_back(build_kernels(models[q].coeffs, ld, grid[q], T, K, d));
  }
  const auto res = lambda_cesaro(kernels, [&](std::size_t N) { return by_N.at(N)->noise.M; }, ld, theta);
  PlotTable tab;
  tab.name = "cesaro_vs_N";
  tab.columns = {{"N", "network size index"},
                 {"gamma", "number of averaged noise columns"},
                 {"lambda_N", "Cesaro average at N"},
                 {"q1", "q1(N)"},
                 {"q2", "q2(N)"}};
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const auto qq = q_quantities(models[q].coeffs, ld, grid[q]);
    json row = {{"N", grid[q]},
                {"gamma", kernels[q].gamma},
                {"lambda_N", res.averages[q]},
                {"q1", qq.q1},
                {"q2", qq.q2},
                {"growth_ok", growth_ok(models[q].coeffs, ld, grid[q])}};
    row["kernel_gap_prev"] = q > 0 ? json(kernel_gap(kernels[q - 1], kernels[q])) : json(nullptr);
    rows.push_back(row);
    tab.rows.push_back({static_cast<double>(grid[q]), static_cast<double>(kernels[q].gamma), res.averages[q],
                        qq.q1, qq.q2});
  }
  env.payload = {{"family", family}, {"T", T},   {"K", K},
                 {"d", d},           {"rows", rows}, {"lambda", res.lambda},
                 {"cauchy_gap", res.cauchy_gap}};
  if (ldj.contains("x")) {
    const json& xj = ldj["x"];
    std::vector<std::vector<double>> x;
    if (!xj.is_array() || xj.size() != theta.coords.size()) bad("ld.x", "must match the theta layout");
    for (std::size_t i = 0; i < xj.size(); ++i) {
      if (!xj[i].is_array() || xj[i].size() != theta.coords[i].size()) bad("ld.x", "must match the theta layout");
      std::vector<double> xi;
      for (const auto& v : xj[i]) {
        if (!v.is_number()) bad("ld.x", "expected numbers");
        xi.push_back(v.get<double>());
      }
      x.push_back(std::move(xi));
    }
    const auto probe = lambda_star_probe(kernels.back(), models.back().noise.M, theta, x);
    json w = json::array();
    for (const auto& c : probe.theta.coords) {
      json wi = json::array();
      for (const auto& a : c) wi.push_back(a.weight);
      w.push_back(wi);
    }
    env.payload["lambda_star_probe"] = {{"value", probe.value}, {"weights", w}};
  }
  env.tables.push_back(std::move(tab));
}

void run_ldp_tail(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  const std::string family = s.str("family", "mckean_tail");
  const auto grid = s.grid("N_grid", {5, 10, 20, 40, 80});
  const double eps = s.num("eps", 0.3);
  const std::size_t d = s.count("d", 4);
  if (eps < 0.0) bad("eps", "must be >= 0");
  SimConfig sim = sim_config(spec, env.seed);
  LDConfig ld;
  if (spec.contains("ld")) ld.gamma_of_N = gamma_rule(spec["ld"]);
  const auto pts = tail_slope(
      [&](std::size_t N) {
        auto mi = family_instance(family, N);
        return std::make_pair(mi.coeffs, mi.noise);
      },
      grid, ld, eps, sim, d);
  json rows = json::array();
  std::ostringstream csv;
  csv << "N,gamma,exceedances,paths,p_hat,wilson_lo,wilson_hi,normalized_log,below_floor\n";
  PlotTable tab;
  tab.name = "tail_vs_N";
  tab.columns = {{"N", "network size index"},
                 {"p_hat", "exceedance frequency"},
                 {"wilson_lo", "95% Wilson lower limit"},
                 {"wilson_hi", "95% Wilson upper limit"},
                 {"normalized_log", "log(p_hat) / gamma(N); -inf when no exceedance"}};
  for (const auto& t : pts) {
    rows.push_back({{"N", t.N},
                    {"gamma", t.gamma},
                    {"exceedances", t.exceedances},
                    {"paths", t.paths},
                    {"p_hat", t.p_hat},
                    {"wilson_lo", t.wilson_lo},
                    {"wilson_hi", t.wilson_hi},
                    {"normalized_log", std::isfinite(t.normalized_log) ? json(t.normalized_log) : json(nullptr)},
                    {"below_floor", t.below_floor}});
    csv << t.N << ',' << t.gamma << ',' << t.exceedances << ',' << t.paths << ',' << detail::num(t.p_hat) << ','
        << detail::num(t.wilson_lo) << ',' << detail::num(t.wilson_hi) << ',' << detail::num(t.normalized_log)
        << ',' << (t.below_floor ? 1 : 0) << '\n';
    tab.rows.push_back({static_cast<double>(t.N), t.p_hat, t.wilson_lo, t.wilson_hi, t.normalized_log});
  }
  env.files.emplace_back("tail.csv", csv.str());
  env.payload = {{"family", family}, {"eps", eps}, {"d", d}, {"sim", sim_json(sim)}, {"rows", rows}};
  env.tables.push_back(std::move(tab));
}

void run_mckean_sweep(const json& spec, const std::string& base, ResultEnvelope& env) {
  Spec s{spec, base};
  const auto grid = s.grid("N_grid", {20, 40, 80, 160});
  SimConfig sim = sim_config(spec, env.seed);
  const double x0_mean = s.num("x0_mean", 0.0), x0_var = s.num("x0_var", 1.0);
  if (x0_var < 0.0) bad("x0_var", "must be >= 0");
  PlotTable tab;
  tab.name = "error_vs_N";
  tab.columns = {{"N", "particles"},
                 {"delta_hat", "estimated sup-L2 distance"},
                 {"std_err", "jackknife standard error"},
                 {"bound", "assembled error bound"}};
  json rows = json::array();
  std::vector<double> xs, ys;
  for (auto N : grid) {
    const ModelInstance mi = mckean(N, x0_mean, x0_var);
    const ErrorEstimate est = estimate_error(mi.coeffs, mi.noise, sim);
    const RateReport rep = error_bound(mi.coeffs, mi.noise, sim.T);
    rows.push_back({{"N", N}, {"delta_hat", est.delta_hat}, {"std_err", est.std_err}, {"bound", rep.bound},
                    {"vacuous", rep.vacuous}});
    tab.rows.push_back({static_cast<double>(N), est.delta_hat, est.std_err, rep.bound});
    xs.push_back(static_cast<double>(N));
    ys.push_back(est.delta_hat);
  }
  env.payload = {{"sim", sim_json(sim)}, {"rows", rows}};
  env.payload["slope"] = xs.size() >= 2 ? json(loglog_slope(xs, ys)) : json(nullptr);
  env.tables.push_back(std::move(tab));
}

}  // namespace

json ResultEnvelope::to_json() const {
  return {{"format", kResultFormat}, {"tool", "pmfnet"},   {"version", version},
          {"seed", seed},            {"started", started}, {"finished", finished},
          {"kind", spec.value("kind", "")}, {"spec", spec}, {"payload", payload}};
}

ResultEnvelope run_experiment(const json& spec, const std::string& base_dir) {
  if (!spec.is_object()) throw ConfigError("spec: expected an object");
  if (spec.contains("format") && spec["format"] != kExperimentFormat) {
    bad("format", std::string("expected \"") + kExperimentFormat + "\"");
  }
  if (!spec.contains("kind") || !spec["kind"].is_string()) bad("kind", "missing experiment kind");
  const std::string kind = spec["kind"].get<std::string>();
  ResultEnvelope env;
  env.spec = spec;
  env.version = PMFNET_VERSION;
  env.seed = master_seed(spec);
  env.started = utc_now();
  static const std::map<std::string, void (*)(const json&, const std::string&, ResultEnvelope&)> table = {
      {"simulate", run_simulate},       {"rates", run_rates},       {"certify", run_certify},
      {"chaos-sweep", run_chaos_sweep}, {"pagen", run_pagen},       {"pafit", run_pafit},
      {"ldp-lambda", run_ldp_lambda},   {"ldp-tail", run_ldp_tail}, {"mckean-sweep", run_mckean_sweep}};
  auto it = table.find(kind);
  if (it == table.end()) bad("kind", "unknown experiment kind '" + kind + "'");
  it->second(spec, base_dir, env);
  env.finished = utc_now();
  return env;
}

std::string table_csv(const PlotTable& t) {
  std::ostringstream os;
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c].first;
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << detail::num(row[c]);
    os << '\n';
  }
  return os.str();
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError(p.string() + ": cannot write file");
  out << content;
}

}  // namespace

void emit_plotdata(const ResultEnvelope& env, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& t : env.tables) {
    write_file(fs::path(out_dir) / (t.name + ".csv"), table_csv(t));
    json cols = json::array();
    for (const auto& [name, desc] : t.columns) cols.push_back({{"name", name}, {"description", desc}});
    json side = {{"table", t.name}, {"kind", env.spec.value("kind", "")}, {"columns", cols}};
    write_file(fs::path(out_dir) / (t.name + ".columns.json"), side.dump(2) + "\n");
  }
}

void write_outputs(const ResultEnvelope& env, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "result.json", env.to_json().dump(2) + "\n");
  for (const auto& [name, content] : env.files) write_file(fs::path(out_dir) / name, content);
  emit_plotdata(env, out_dir);
}

}  // namespace pmfnet
