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

#include "pmfnet/noise.hpp"

namespace testing {

inline pmfnet::LevySpec brownian(double var) {
  pmfnet::LevySpec s;
  s.brownian_var = var;
  return s;
}

inline pmfnet::LevySpec poisson(double var, double rate, std::vector<pmfnet::JumpAtom> atoms) {
  pmfnet::LevySpec s;
  s.brownian_var = var;
  s.jump_rate = rate;
  s.atoms = std::move(atoms);
  return s;
}

}  // namespace testing
