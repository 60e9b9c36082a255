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

// Command-line front end; talks to the library only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pmfnet/pmfnet.h"

using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitOther = 1;

int status_exit(pmf_status s) {
  if (s == PMF_OK) return 0;
  return s == PMF_ERR_CONFIG ? kExitConfig : kExitOther;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open config");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// A bare model document becomes {"kind": ..., "model": <doc>}.
json as_spec(const json& doc, const std::string& kind) {
  const bool is_model = doc.contains("coefficients") || (doc.contains("family") && !doc.contains("kind")) ||
                        (doc.value("format", "") == "pmfnet.model/1");
  if (is_model) return {{"format", "pmfnet.experiment/1"}, {"kind", kind}, {"model", doc}};
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> kinds;
  for (size_t i = 0; i < pmf_kind_count(); ++i) kinds.emplace_back(pmf_kind_name(i));

  CLI::App app{"Particle networks versus their mean-field limits"};
  app.set_version_flag("--version", std::string(pmf_version()));
  std::string kind, config, out_dir, n_grid;
  std::uint64_t seed = 0;
  std::size_t paths = 0, steps = 0;
  unsigned threads = 0;
  app.add_option("kind", kind, "Experiment kind")->required()->check(CLI::IsMember(kinds));
  app.add_option("--config,-c", config, "Experiment spec or model document (JSON)");
  auto* o_seed = app.add_option("--seed", seed, "Master seed");
  app.add_option("--out,-o", out_dir, "Directory for result.json, CSV files and plot data");
  app.add_option("--n-grid", n_grid, "Comma-separated N values");
  auto* o_paths = app.add_option("--paths", paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
  auto* o_steps = app.add_option("--steps", steps, "Time steps")->check(CLI::PositiveNumber);
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (0: default)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  json spec;
  std::string base = ".";
  try {
    if (!config.empty()) {
      const std::string text = slurp(config);
      try {
        spec = json::parse(text);
      } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
          if (text[i] == '\n') {
            ++line;
            col = 1;
          } else {
            ++col;
          }
        }
        std::string msg = e.what();
        const auto p = msg.find(": ");
        if (p != std::string::npos) msg = msg.substr(p + 2);
        std::cerr << "pmfnet: " << config << ":" << line << ":" << col << ": " << msg << "\n";
        return kExitConfig;
      }
      spec = as_spec(spec, kind);
      base = std::filesystem::path(config).parent_path().string();
      if (base.empty()) base = ".";
    } else {
      spec = json::object();
    }
    if (!spec.is_object()) throw std::runtime_error("config must be a JSON object");
    if (spec.contains("kind") && spec["kind"] != kind) {
      throw std::runtime_error("config kind '" + spec["kind"].dump() + "' does not match '" + kind + "'");
    }
    spec["kind"] = kind;
    if (!spec.contains("format")) spec["format"] = "pmfnet.experiment/1";
    if (*o_seed) spec["seed"] = seed;
    if (!n_grid.empty()) {
      json g = json::array();
      std::stringstream ss(n_grid);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
          v = std::stoull(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != cell.size()) throw std::runtime_error("--n-grid: '" + cell + "' is not a count");
        g.push_back(v);
      }
      spec["N_grid"] = g;
    }
    if (*o_paths) spec["sim"]["paths"] = paths;
    if (*o_steps) spec["sim"]["steps"] = steps;
    if (*o_threads) spec["sim"]["threads"] = threads;
  } catch (const std::exception& e) {
    std::cerr << "pmfnet: " << e.what() << "\n";
    return kExitConfig;
  }
  pmf_set_threads(threads);

  pmf_result* res = nullptr;
  const pmf_status st = pmf_run(spec.dump().c_str(), base.c_str(), &res);
  if (st != PMF_OK) {
    std::cerr << "pmfnet: " << pmf_last_error() << "\n";
    return status_exit(st);
  }
  int rc = pmf_result_exit_code(res);
  if (!out_dir.empty() && pmf_result_write(res, out_dir.c_str()) != PMF_OK) {
    std::cerr << "pmfnet: " << pmf_last_error() << "\n";
    pmf_result_free(res);
    return kExitOther;
  }
  if (kind == "ldp-tail") {
    for (size_t i = 0; i < pmf_result_file_count(res); ++i) {
      if (std::string(pmf_result_file_name(res, i)) == "tail.csv") std::cout << pmf_result_file_content(res, i);
    }
  } else {
    std::cout << pmf_result_envelope(res) << "\n";
  }
  if (kind == "certify") {
    const json p = json::parse(pmf_result_payload(res));
    std::cerr << p["verdict"].get<std::string>() << ": delta_hat + 3 se = " << p["upper"].dump()
              << ", bound = " << p["bound"].dump();
    if (p.contains("tolerance")) std::cerr << ", tolerance = " << p["tolerance"].dump();
    std::cerr << "\n";
  }
  pmf_result_free(res);
  return rc;
}
