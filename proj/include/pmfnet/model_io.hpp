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
#include <string_view>

#include <json.hpp>

#include "pmfnet/families.hpp"

namespace pmfnet {

inline constexpr const char* kModelFormat = "pmfnet.model/1";

// Either an explicit document (dimensions, per-role entry triples, noise) or
// {"family": name, "N": count}. Errors name the offending field path.
ModelInstance model_from_json(const nlohmann::json& j, const std::string& where = "model");
nlohmann::json model_to_json(const ModelInstance& mi);

// Syntax errors are reported as "source:line:column: message".
nlohmann::json parse_json_text(std::string_view text, const std::string& source);
nlohmann::json read_json_file(const std::string& path);

ModelInstance load_model_file(const std::string& path);
void save_model_file(const ModelInstance& mi, const std::string& path);

// Named families: mckean, mckean_tail, classex, sparse_core_periphery.
ModelInstance family_instance(const std::string& name, std::size_t N);

}  // namespace pmfnet
