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

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pmfnet {

inline constexpr const char* kExperimentFormat = "pmfnet.experiment/1";
inline constexpr const char* kResultFormat = "pmfnet.result/1";

const std::vector<std::string>& experiment_kinds();

// One figure-like table; columns are described in a sidecar file.
struct PlotTable {
  std::string name;
  std::vector<std::pair<std::string, std::string>> columns;  // name, description
  std::vector<std::vector<double>> rows;
};

struct ResultEnvelope {
  nlohmann::json spec;
  std::string version;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  nlohmann::json payload;
  int exit_code = 0;  // 3 when certification fails
  std::vector<PlotTable> tables;
  std::vector<std::pair<std::string, std::string>> files;  // extra outputs: name, content

  nlohmann::json to_json() const;
};

// Relative paths inside the spec resolve against base_dir.
ResultEnvelope run_experiment(const nlohmann::json& spec, const std::string& base_dir = ".");

// Writes <name>.csv plus <name>.columns.json for every table.
void emit_plotdata(const ResultEnvelope& env, const std::string& out_dir);

// result.json, the extra files and the plot data.
void write_outputs(const ResultEnvelope& env, const std::string& out_dir);

std::string table_csv(const PlotTable& t);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pmfnet
