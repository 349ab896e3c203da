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

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fis/data.hpp"
#include "fis/model.hpp"

namespace fis {

enum class FairnessMetricKind { DP, EOp, EOd };

std::string_view to_string(FairnessMetricKind kind);
FairnessMetricKind parse_metric_kind(std::string_view name);

// Hard gaps over predicted classes. Class 1 is the positive outcome. With
// more than two groups the reported gap is the max pairwise difference
// (largest group rate minus smallest). Every group in [0, num_groups) must
// have support for the rates involved, otherwise std::invalid_argument.

double dp_gap(std::span<const int> predictions, std::span<const int> groups, int num_groups = 2);
double eop_gap(std::span<const int> predictions, std::span<const int> labels,
               std::span<const int> groups, int num_groups = 2);
/// Mean of the TPR gap and the FPR gap.
double eod_gap(std::span<const int> predictions, std::span<const int> labels,
               std::span<const int> groups, int num_groups = 2);

/// Mean loss of group k minus mean loss of the whole set (signed).
double risk_disparity(std::span<const double> losses, std::span<const int> groups, int k);
double risk_disparity(const Mlp& m, const Dataset& test, int k);

struct FairnessReport {
  double accuracy = 0.0;
  std::optional<double> dp_gap;
  std::optional<double> eop_gap;
  std::optional<double> eod_gap;
  std::map<int, double> risk_disparity_per_group;
};

/// Gaps that are undefined on `ds` (a group without positives, say) are
/// left empty rather than thrown.
FairnessReport fairness_report(const Mlp& m, const Dataset& ds);

/// Differentiable relaxation of the hard gap using the class-1 probability
/// p(y=1|x): per-group means of p over the relevant subset (all examples
/// for DP, y=1 for EOp), gap = largest minus smallest group mean. EOd is the
/// mean of the y=1 and y=0 gaps.
double surrogate_value(const Mlp& m, const Dataset& val, FairnessMetricKind kind);

/// Gradient of surrogate_value. A component gap that is exactly zero
/// contributes the zero subgradient.
GradientVector surrogate_grad(const Mlp& m, const Dataset& val, FairnessMetricKind kind,
                              const GradScope& scope = {});

/// Signed two-group relaxation mean_{a=0} p - mean_{a=1} p over the subset
/// selected by `kind` (EOd: mean of the two restricted signed gaps), and its
/// gradient. Requires num_groups == 2.
double surrogate_signed_gap(const Mlp& m, const Dataset& val, FairnessMetricKind kind);
GradientVector surrogate_signed_grad(const Mlp& m, const Dataset& val, FairnessMetricKind kind,
                                     const GradScope& scope = {});

}  // namespace fis
