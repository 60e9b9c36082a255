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

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmfnet/noise.hpp"
#include "pmfnet/sparse_matrix.hpp"

namespace pmfnet {

enum class Role { aC, aP, sC, sP, fC, fP, rC, rP };

inline constexpr std::array<Role, 8> kAllRoles = {Role::aC, Role::aP, Role::sC, Role::sP,
                                                  Role::fC, Role::fP, Role::rC, Role::rP};

const char* role_name(Role r);
std::optional<Role> role_from_name(const std::string& name);

struct CoefficientSet {
  std::size_t n = 0;
  std::size_t m = 0;
  SparseMatrix aC, aP, sC, sP, fC, fP, rC, rP;

  const SparseMatrix& get(Role r) const;
  SparseMatrix& get(Role r);
  bool periphery_is_zero() const { return aP.empty() && sP.empty() && fP.empty() && rP.empty(); }
};

// Missing roles become zero matrices.
CoefficientSet build_coefficients(std::size_t n, std::size_t m,
                                  std::vector<std::pair<Role, SparseMatrix>> blocks);

// Core particles are 0..n0-1; systematic noises are columns 0..n00-1 and
// particle i owns idiosyncratic column n00 + i.
struct CorePeripheryLayout {
  std::size_t n0 = 0;
  std::size_t n_periphery = 0;
  std::size_t n00 = 0;

  std::size_t n() const { return n0 + n_periphery; }
  bool is_core(std::size_t i) const { return i < n0; }
};

struct LayoutViolation {
  std::string matrix;
  std::size_t row;
  std::size_t col;
  std::string rule;
};

std::vector<LayoutViolation> validate_layout(const CoefficientSet& c,
                                             const CorePeripheryLayout& layout);

struct VQuantities {
  double v_a = 0, v_a_d = 0, v_sigma = 0, v_L = 0, v_b = 0, v_X = 0, v_f = 0, v_rho_M = 0;
  double T = 0;
};

VQuantities compute_v_quantities(const CoefficientSet& c, const NoiseModel& noise, double T);

void check_compatible(const CoefficientSet& c, const NoiseModel& noise);

// Throws LayoutError when aP or sP has a nonzero diagonal entry.
void require_zero_periphery_diagonal(const CoefficientSet& c);

}  // namespace pmfnet
