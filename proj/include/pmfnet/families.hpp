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

#include <cstdint>
#include <random>

#include "pmfnet/network.hpp"
#include "pmfnet/noise.hpp"

namespace pmfnet {

struct ModelInstance {
  CoefficientSet coeffs;
  NoiseModel noise;
  CorePeripheryLayout layout;  // n0 = n00 = 0 unless the family has a core
  double R_A = 1.0;
  double R_Sigma = 1.0;
};

// N particles pulled towards the average of the others, each driven by its
// own unit Brownian motion through rC = I.
ModelInstance mckean(std::size_t N, double x0_mean = 0.0, double x0_var = 1.0);

// Order 1/N pair interaction on top of a diagonal core with independent
// noises per particle.
ModelInstance classex(std::size_t N);

// Two core particles, one systematic noise, N periphery particles with three
// drift links and two volatility links each; R_A = R_Sigma = N.
ModelInstance sparse_core_periphery(std::size_t N);

// McKean drift, deterministic X(0) = 0, no volatility, and periphery noise
// loadings rP_ik = +-1/N on the other particles' noises.
ModelInstance mckean_tail(std::size_t N);

enum class RandomKind {
  General,        // correlated noises, jumps, non-diagonal core
  ZeroPeriphery,  // General with aP = sP = fP = rP = 0
  DiagonalCore,   // diagonal core matrices and independent noises per particle
};

// Random admissible configuration with 2 <= n <= n_max and moderate
// coefficients (v_a <= 2, v_sigma <= 0.6).
ModelInstance random_config(std::mt19937_64& rng, RandomKind kind, std::size_t n_max);

}  // namespace pmfnet
