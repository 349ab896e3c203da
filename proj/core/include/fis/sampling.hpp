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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fis/data.hpp"
#include "fis/fairness.hpp"
#include "fis/influence.hpp"
#include "fis/model.hpp"

namespace fis {

enum class BaselineKind { ERM, Random, Uncertainty, InfluenceOnly, JTT };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view name);

struct FisConfig {
  std::size_t rounds = 5;            // T
  std::size_t budget_per_round = 64; // r
  double tolerance = 0.05;           // epsilon
  FairnessMetricKind metric = FairnessMetricKind::DP;
  LabelStrategy label_strategy = LabelStrategy::MinInfluence;
  /// Hidden widths of the classifier; input and output sizes come from data.
  std::vector<std::size_t> hidden = {64};
  /// Warm-start training; also supplies the learning rate, batch size,
  /// new-data weight and gradient scope for later rounds.
  TrainConfig train;
  std::size_t retrain_epochs = 20;
  bool retrain_from_scratch = false;
  /// Step size used in influence scores; defaults to train.learning_rate.
  std::optional<double> influence_eta;
  /// Upweighting factor for examples the warm-start model misclassifies (JTT).
  double jtt_lambda = 20.0;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  /// Keep every candidate's score for every round (influence dump).
  bool keep_all_scores = false;

  double scoring_eta() const { return influence_eta.value_or(train.learning_rate); }
  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  /// Selected candidates with the scores they had at selection time.
  std::vector<InfluenceScore> selected;
  std::vector<int> true_labels;
  std::string checkpoint_id;
  double val_accuracy = 0.0;          // VAL_t
  double val_reference = 0.0;         // VAL of the model this round continued from
  double tolerance_threshold = 0.0;   // val_reference - epsilon
  bool tolerated = true;              // VAL_t >= val_reference - epsilon
  bool in_output = false;             // VAL_t > VAL_0
  FairnessReport validation;
  FairnessReport test;
  std::size_t budget_consumed = 0;
  std::size_t training_size = 0;
};

struct RunResult {
  std::string strategy;
  std::vector<RoundRecord> rounds;  // rounds[0] is the warm start
  std::vector<Mlp> checkpoints;     // aligned with rounds
  /// Rounds whose model passed the output filter VAL_t > VAL_0.
  std::vector<std::size_t> output_rounds;
  /// Last tolerated round; its model is the run's final model.
  std::size_t final_round = 0;
  /// Per-round scores of every candidate considered (keep_all_scores only).
  std::vector<std::vector<InfluenceScore>> all_scores;

  const Mlp& final_model() const { return checkpoints.at(final_round); }
  const RoundRecord& final_record() const { return rounds.at(final_round); }
  const RoundRecord& warm_start() const { return rounds.front(); }
};

struct SelectionResult {
  std::vector<std::size_t> selected;
  std::vector<InfluenceScore> scores;  // one per scored candidate, in candidate order
};

/// Scores every candidate not in `excluded` against the frozen scorer and
/// keeps those with infl_acc <= 0 and infl_fair <= 0; returns up to r of
/// them ordered by infl_fair ascending, then candidate id ascending.
SelectionResult fis_select_round(const InfluenceScorer& scorer, const CandidatePool& pool,
                                 const std::vector<bool>& excluded, const FisConfig& cfg);
SelectionResult fis_select_round(const Mlp& m, const CandidatePool& pool, const Dataset& val,
                                 const FisConfig& cfg);

/// Filters and ranks precomputed scores exactly as fis_select_round does.
std::vector<std::size_t> select_fair_influential(const std::vector<InfluenceScore>& scores,
                                                 std::size_t budget);

RunResult fis_run(const SplitBundle& bundle, const FisConfig& cfg);
RunResult baseline_run(const SplitBundle& bundle, BaselineKind kind, const FisConfig& cfg);

/// Shannon entropy of the predictive distribution.
double prediction_entropy(const Mlp& m, std::span<const double> x);

}  // namespace fis
