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

#include "pmfnet/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pmfnet/error.hpp"

namespace pmfnet {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double number_or(const json& j, const std::string& key, double dflt, const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? dflt : number(*it, path + "." + key);
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::vector<Entry> triples(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of [row, col, value] triples");
  std::vector<Entry> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    const json& t = j[k];
    if (!t.is_array() || t.size() != 3) fail(p, "expected [row, col, value]");
    out.push_back({count(t[0], p + "[0]"), count(t[1], p + "[1]"), number(t[2], p + "[2]")});
  }
  return out;
}

SparseMatrix matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& path) {
  try {
    return SparseMatrix::from_entries(rows, cols, triples(j, path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    fail(path, msg);
  }
}

LevySpec levy(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  LevySpec s;
  s.brownian_var = number_or(j, "brownian_var", 0.0, path);
  s.jump_rate = number_or(j, "jump_rate", 0.0, path);
  if (auto it = j.find("atoms"); it != j.end()) {
    if (!it->is_array()) fail(path + ".atoms", "expected an array of [size, prob] pairs");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string p = path + ".atoms[" + std::to_string(k) + "]";
      const json& a = (*it)[k];
      if (!a.is_array() || a.size() != 2) fail(p, "expected [size, prob]");
      s.atoms.push_back({number(a[0], p + "[0]"), number(a[1], p + "[1]")});
    }
  }
  try {
    s.validate(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::vector<LevySpec> levy_list(const json& j, std::size_t len, const std::string& path) {
  if (!j.is_array() || j.size() != len) fail(path, "expected an array of " + std::to_string(len) + " specs");
  std::vector<LevySpec> out;
  for (std::size_t k = 0; k < len; ++k) out.push_back(levy(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<double> numbers(const json& j, std::size_t len, const std::string& path) {
  if (!j.is_array() || j.size() != len) fail(path, "expected an array of " + std::to_string(len) + " numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < len; ++k) out.push_back(number(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

json entries_json(const SparseMatrix& a) {
  json out = json::array();
  for (const auto& e : a.entries()) out.push_back(json::array({e.row, e.col, e.value}));
  return out;
}

json levy_json(const LevySpec& s) {
  json j = {{"brownian_var", s.brownian_var}};
  if (s.jump_rate != 0.0 || !s.atoms.empty()) {
    j["jump_rate"] = s.jump_rate;
    json atoms = json::array();
    for (const auto& a : s.atoms) atoms.push_back(json::array({a.size, a.prob}));
    j["atoms"] = atoms;
  }
  return j;
}

std::vector<Entry> upper_offdiag(const SparseMatrix& a) {
  std::vector<Entry> out;
  for (const auto& e : a.entries()) {
    if (e.row < e.col) out.push_back(e);
  }
  return out;
}

}  // namespace

ModelInstance family_instance(const std::string& name, std::size_t N) {
  if (name == "mckean") return mckean(N);
  if (name == "mckean_tail") return mckean_tail(N);
  if (name == "classex") return classex(N);
  if (name == "sparse_core_periphery") return sparse_core_periphery(N);
  throw ConfigError("unknown model family '" + name + "'");
}

ModelInstance model_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  if (auto it = j.find("format"); it != j.end() && *it != kModelFormat) {
    fail(where + ".format", std::string("expected \"") + kModelFormat + "\"");
  }
  if (auto it = j.find("family"); it != j.end()) {
    if (!it->is_string()) fail(where + ".family", "expected a family name");
    try {
      return family_instance(it->get<std::string>(), count(field(j, "N", where), where + ".N"));
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      fail(where + ".family", msg);
    }
  }
  const std::size_t n = count(field(j, "n", where), where + ".n");
  const std::size_t m = count(field(j, "m", where), where + ".m");
  if (n == 0) fail(where + ".n", "must be >= 1");

  std::vector<std::pair<Role, SparseMatrix>> blocks;
  if (auto it = j.find("coefficients"); it != j.end()) {
    const std::string cp = where + ".coefficients";
    if (!it->is_object()) fail(cp, "expected an object keyed by role");
    for (const auto& [key, val] : it->items()) {
      auto role = role_from_name(key);
      if (!role) fail(cp + "." + key, "unknown role (expected aC, aP, sC, sP, fC, fP, rC, rP)");
      const bool square = *role == Role::aC || *role == Role::aP || *role == Role::sC || *role == Role::sP;
      blocks.emplace_back(*role, matrix(val, n, square ? n : m, cp + "." + key));
    }
  }

  ModelInstance mi;
  mi.coeffs = build_coefficients(n, m, std::move(blocks));

  const std::string np = where + ".noise";
  const json empty = json::object();
  const json& nj = j.contains("noise") ? j["noise"] : empty;
  if (!nj.is_object()) fail(np, "expected an object");
  std::vector<LevySpec> L(n), M(m);
  if (nj.contains("L")) L = levy_list(nj["L"], n, np + ".L");
  if (nj.contains("M")) M = levy_list(nj["M"], m, np + ".M");
  std::vector<DriftDensity> b(m);
  if (auto it = nj.find("b"); it != nj.end()) {
    if (!it->is_array() || it->size() != m) fail(np + ".b", "expected an array of " + std::to_string(m) + " densities");
    for (std::size_t k = 0; k < m; ++k) {
      const std::string p = np + ".b[" + std::to_string(k) + "]";
      const json& d = (*it)[k];
      if (!d.is_object()) fail(p, "expected an object");
      b[k] = {number_or(d, "offset", 0.0, p), number_or(d, "amplitude", 0.0, p),
              number_or(d, "omega", 0.0, p), number_or(d, "phase", 0.0, p),
              number_or(d, "white_var", 0.0, p)};
      if (b[k].white_var < 0.0) fail(p + ".white_var", "must be >= 0");
    }
  }
  std::vector<double> x0_mean(n, 0.0), x0_var(n, 0.0);
  if (nj.contains("x0_mean")) x0_mean = numbers(nj["x0_mean"], n, np + ".x0_mean");
  if (nj.contains("x0_var")) x0_var = numbers(nj["x0_var"], n, np + ".x0_var");
  for (std::size_t i = 0; i < n; ++i) {
    if (x0_var[i] < 0.0) fail(np + ".x0_var[" + std::to_string(i) + "]", "must be >= 0");
  }
  std::vector<Entry> l_off, x_off;
  if (nj.contains("L_offdiag")) l_off = triples(nj["L_offdiag"], np + ".L_offdiag");
  if (nj.contains("x0_offdiag")) x_off = triples(nj["x0_offdiag"], np + ".x0_offdiag");
  try {
    mi.noise = NoiseModel::make(std::move(L), l_off, std::move(M), std::move(b), std::move(x0_mean),
                                x0_var, x_off);
  } catch (const ConfigError& e) {
    fail(np, e.what());
  }

  mi.layout = {0, n, m >= n ? m - n : 0};
  if (auto it = j.find("layout"); it != j.end()) {
    const std::string lp = where + ".layout";
    mi.layout.n0 = count(field(*it, "n0", lp), lp + ".n0");
    mi.layout.n_periphery = count(field(*it, "n_periphery", lp), lp + ".n_periphery");
    mi.layout.n00 = count(field(*it, "n00", lp), lp + ".n00");
    mi.R_A = number_or(*it, "R_A", 1.0, lp);
    mi.R_Sigma = number_or(*it, "R_Sigma", 1.0, lp);
    if (mi.layout.n() != n) fail(lp, "n0 + n_periphery must equal n");
  }
  return mi;
}

json model_to_json(const ModelInstance& mi) {
  const auto& c = mi.coeffs;
  json coeffs = json::object();
  for (Role r : kAllRoles) {
    if (!c.get(r).empty()) coeffs[role_name(r)] = entries_json(c.get(r));
  }
  const auto& nz = mi.noise;
  json L = json::array(), M = json::array(), b = json::array();
  for (const auto& s : nz.L) L.push_back(levy_json(s));
  for (const auto& s : nz.M) M.push_back(levy_json(s));
  for (const auto& d : nz.b) {
    b.push_back({{"offset", d.offset}, {"amplitude", d.amplitude}, {"omega", d.omega},
                 {"phase", d.phase}, {"white_var", d.white_var}});
  }
  json l_off = json::array(), x_off = json::array();
  for (const auto& e : upper_offdiag(nz.L_cov)) l_off.push_back(json::array({e.row, e.col, e.value}));
  for (const auto& e : upper_offdiag(nz.x0_cov)) x_off.push_back(json::array({e.row, e.col, e.value}));
  return {{"format", kModelFormat},
          {"n", c.n},
          {"m", c.m},
          {"layout",
           {{"n0", mi.layout.n0},
            {"n_periphery", mi.layout.n_periphery},
            {"n00", mi.layout.n00},
            {"R_A", mi.R_A},
            {"R_Sigma", mi.R_Sigma}}},
          {"coefficients", coeffs},
          {"noise",
           {{"L", L},
            {"L_offdiag", l_off},
            {"M", M},
            {"b", b},
            {"x0_mean", nz.x0_mean},
            {"x0_var", nz.x0_variances()},
            {"x0_offdiag", x_off}}}};
}

json parse_json_text(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t k = 0; k < upto; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

ModelInstance load_model_file(const std::string& path) {
  return model_from_json(read_json_file(path), path);
}

void save_model_file(const ModelInstance& mi, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot write file");
  out << model_to_json(mi).dump(2) << '\n';
}

}  // namespace pmfnet
