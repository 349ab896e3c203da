// Copyright 2026 The fairsample Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fis/data.hpp"
#include "fis/model.hpp"

namespace fis {

/// L1 distance between two mixture-weight vectors, in [0, 2].
double dist(std::span<const double> pA, std::span<const double> pB);

/// Empirical stand-ins for the population constants. Every max-based value
/// is a lower estimate of the true supremum.
struct EmpiricalConstants {
  double max_component_loss = 0.0;  // max_i mean loss on component i
  std::vector<double> component_loss;
  double max_grad_norm = 0.0;       // G
  double smoothness = 0.0;          // L
  std::size_t samples_per_component = 0;
  std::size_t curvature_pairs = 0;
};

struct CurvatureProbe {
  std::size_t pairs = 16;
  /// Std-dev of the Gaussian parameter perturbations around the model.
  double radius = 0.05;
};

EmpiricalConstants estimate_constants(const Mlp& m, const ComponentMixture& mixture,
                                      std::size_t samples_per_component, std::uint64_t seed,
                                      const CurvatureProbe& probe = {});

struct BoundReport {
  std::string kind;  // "generalization" or "disparity"
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  /// Always holds G_P, G_k, G, L, Phi, Upsilon, varpi, varpi_k, dist_PQ,
  /// dist_PkQk, dist_PkP, N_P, N_Pk, delta, plus T and eta.
  std::map<std::string, double> constants;
};

inline TrainConfig bound_train_defaults() {
  TrainConfig t;
  t.learning_rate = 0.1;
  t.epochs = 30;
  return t;
}

struct BoundConfig {
  double delta = 0.05;
  std::vector<std::size_t> hidden = {16};
  TrainConfig train = bound_train_defaults();
  std::size_t samples_per_component = 500;
  /// Size of the fresh samples used to fit the ideal-risk reference models.
  std::size_t reference_size = 2000;
  CurvatureProbe probe;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Both bound checks for one trial, measured from a single set of models.
struct BoundPair {
  BoundReport generalization;
  BoundReport disparity;
};

BoundPair check_bounds(const MixtureDraw& draw, int group, const BoundConfig& cfg);
BoundReport check_generalization_bound(const MixtureDraw& draw, const BoundConfig& cfg);
BoundReport check_disparity_bound(const MixtureDraw& draw, int group, const BoundConfig& cfg);

double concentration_term(double delta, double n);
double generalization_rhs(double g_p, double dist_pq, double delta, double n_p, double train_risk);
/// 4 L^2 G^2 sum_{t=0}^{T-1} (eta^2 (1 + 2 eta^2 L^2))^t with constant eta.
double group_gap_coefficient(double smoothness, double grad_bound, double eta, std::size_t steps);

struct MixtureRisk {
  double direct = 0.0;
  double decomposed = 0.0;  // sum_i p_hat(i) * mean loss on component i
};

MixtureRisk mixture_risk(const Mlp& m, const Dataset& tagged, int num_components);

}  // namespace fis
