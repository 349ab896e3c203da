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
#include <span>
#include <string_view>
#include <vector>

#include "fis/data.hpp"
#include "fis/fairness.hpp"
#include "fis/model.hpp"

namespace fis {

enum class LabelStrategy { MinInfluence, MaxPrediction };

std::string_view to_string(LabelStrategy s);
LabelStrategy parse_label_strategy(std::string_view name);

struct InfluenceScore {
  std::size_t candidate_id = 0;
  int guessed_label = 0;
  double infl_acc = 0.0;
  double infl_fair = 0.0;
  LabelStrategy strategy_used = LabelStrategy::MinInfluence;
};

struct LabelGuess {
  int label = 0;
  /// infl_acc for each hypothesised class.
  std::vector<double> per_class_influence;
};

struct OracleResult {
  double delta_loss_exact = 0.0;
  double delta_fair_exact = 0.0;
  double first_order_loss = 0.0;
  double first_order_fair = 0.0;
};

/// Sum over the validation set of per-example loss gradients.
GradientVector validation_loss_grad(const Mlp& m, const Dataset& val, const GradScope& scope = {});

/// Prediction influence: -eta <grad l(w, (x, y)), sum_n grad l(w, z_n)>.
/// Negative values predict a drop in total validation loss.
double infl_acc(const Mlp& m, std::span<const double> x, int y_hyp, const Dataset& val, double eta,
                const GradScope& scope = {});

/// Fairness influence: -eta <grad l(w, (x, y)), grad phi(w, Q_v)>.
double infl_fair(const Mlp& m, std::span<const double> x, int y_hyp, const Dataset& val, double eta,
                 FairnessMetricKind kind, const GradScope& scope = {});

/// argmin_k |infl_acc(x, k)|, ties toward the lowest class.
LabelGuess guess_label_min_influence(const Mlp& m, std::span<const double> x, const Dataset& val,
                                     double eta, const GradScope& scope = {});

/// argmax_k p(k|x), ties toward the lowest class.
int guess_label_max_prediction(const Mlp& m, std::span<const double> x);

/// Takes one real gradient step on (x, y) and measures the change in summed
/// validation loss and in the fairness surrogate, next to the first-order
/// predictions for the same step.
OracleResult exact_one_step_oracle(const Mlp& m, std::span<const double> x, int y_hyp,
                                   const Dataset& val, double eta, FairnessMetricKind kind,
                                   const GradScope& scope = {});

/// Scores candidates against one frozen model snapshot. The validation
/// loss gradient and the surrogate gradient are computed once at
/// construction; scoring methods are const and thread-safe.
class InfluenceScorer {
 public:
  InfluenceScorer(Mlp snapshot, const Dataset& val, FairnessMetricKind kind, double eta,
                  GradScope scope = {});

  const Mlp& model() const { return model_; }
  double eta() const { return eta_; }
  const GradientVector& validation_grad() const { return val_grad_; }
  const GradientVector& fairness_grad() const { return fair_grad_; }

  double infl_acc(std::span<const double> x, int y_hyp) const;
  double infl_fair(std::span<const double> x, int y_hyp) const;
  LabelGuess guess_min_influence(std::span<const double> x) const;
  int guess_max_prediction(std::span<const double> x) const;

  InfluenceScore score(std::size_t candidate_id, std::span<const double> x,
                       LabelStrategy strategy) const;

 private:
  Mlp model_;
  FairnessMetricKind kind_;
  double eta_;
  GradScope scope_;
  GradientVector val_grad_;
  GradientVector fair_grad_;
};

}  // namespace fis
