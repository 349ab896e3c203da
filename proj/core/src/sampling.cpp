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

#include "fis/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "fis/parallel.hpp"
#include "fis/rng.hpp"

namespace fis {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::ERM: return "ERM";
    case BaselineKind::Random: return "Random";
    case BaselineKind::Uncertainty: return "Uncertainty";
    case BaselineKind::InfluenceOnly: return "InfluenceOnly";
    case BaselineKind::JTT: return "JTT";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view name) {
  if (name == "ERM") return BaselineKind::ERM;
  if (name == "Random") return BaselineKind::Random;
  if (name == "Uncertainty") return BaselineKind::Uncertainty;
  if (name == "InfluenceOnly") return BaselineKind::InfluenceOnly;
  if (name == "JTT") return BaselineKind::JTT;
  throw std::invalid_argument("unknown baseline '" + std::string(name) +
                              "' (expected ERM, Random, Uncertainty, InfluenceOnly or JTT)");
}

void FisConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("fis.rounds must be at least 1");
  if (budget_per_round < 1) throw std::invalid_argument("fis.budget_per_round must be at least 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("fis.tolerance must be nonnegative");
  if (!(jtt_lambda >= 1.0)) throw std::invalid_argument("fis.jtt_lambda must be >= 1");
  if (influence_eta && !(*influence_eta > 0.0)) {
    throw std::invalid_argument("fis.influence_eta must be positive");
  }
  train.validate();
  if (!(train.learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be positive");
}

double prediction_entropy(const Mlp& m, std::span<const double> x) {
  const auto p = forward(m, x);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

namespace {

/// Top `budget` indices of `keys` under (key ascending, id ascending).
std::vector<std::size_t> top_by_key(const std::vector<std::pair<double, std::size_t>>& keyed,
                                    std::size_t budget) {
  auto sorted = keyed;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sorted.size() && out.size() < budget; ++i) {
    out.push_back(sorted[i].second);
  }
  return out;
}

std::vector<std::size_t> open_candidates(const CandidatePool& pool, const std::vector<bool>& excluded) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i >= excluded.size() || !excluded[i]) ids.push_back(i);
  }
  return ids;
}

std::vector<InfluenceScore> score_candidates(const InfluenceScorer& scorer, const CandidatePool& pool,
                                             const std::vector<std::size_t>& ids,
                                             LabelStrategy strategy, std::size_t threads) {
  std::vector<InfluenceScore> scores(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t j) {
    scores[j] = scorer.score(ids[j], pool.features(ids[j]), strategy);
  });
  return scores;
}

}  // namespace

std::vector<std::size_t> select_fair_influential(const std::vector<InfluenceScore>& scores,
                                                 std::size_t budget) {
  std::vector<std::pair<double, std::size_t>> fair;
  for (const auto& s : scores) {
    if (s.infl_acc <= 0.0 && s.infl_fair <= 0.0) fair.emplace_back(s.infl_fair, s.candidate_id);
  }
  return top_by_key(fair, budget);
}

SelectionResult fis_select_round(const InfluenceScorer& scorer, const CandidatePool& pool,
                                 const std::vector<bool>& excluded, const FisConfig& cfg) {
  if (pool.empty()) throw std::invalid_argument("fis_select_round: empty candidate pool");
  SelectionResult res;
  res.scores = score_candidates(scorer, pool, open_candidates(pool, excluded), cfg.label_strategy,
                                cfg.threads);
  res.selected = select_fair_influential(res.scores, cfg.budget_per_round);
  return res;
}

SelectionResult fis_select_round(const Mlp& m, const CandidatePool& pool, const Dataset& val,
                                 const FisConfig& cfg) {
  const InfluenceScorer scorer(m, val, cfg.metric, cfg.scoring_eta(), cfg.train.grad_scope);
  return fis_select_round(scorer, pool, std::vector<bool>(pool.size(), false), cfg);
}

namespace {

/// Picks the next acquisition batch. Receives the frozen model, the set of
/// already-acquired ids and the round index.
using Selector = std::function<SelectionResult(const Mlp&, const std::vector<bool>&, std::size_t)>;

std::vector<std::size_t> layer_sizes_for(const SplitBundle& b, const FisConfig& cfg) {
  std::vector<std::size_t> sizes{b.train.dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(static_cast<std::size_t>(b.train.num_classes()));
  return sizes;
}

void check_bundle(const SplitBundle& b) {
  if (b.train.empty()) throw std::invalid_argument("train set P is empty");
  if (b.validation.empty()) throw std::invalid_argument("validation set Q_v is empty");
  if (b.test.empty()) throw std::invalid_argument("test set Q is empty");
  if (!b.validation.fully_grouped() || !b.test.fully_grouped()) {
    throw std::invalid_argument("validation and test sets need group ids");
  }
}

Mlp warm_start(const SplitBundle& b, const FisConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "warm_start/shuffle");
  const Mlp init = init_model(layer_sizes_for(b, cfg), derive_seed(cfg.seed, "init"));
  const auto items = train_items(b.train);
  return sgd_train(init, items, tc).model;
}

RoundRecord describe(const Mlp& m, const SplitBundle& b, std::size_t round) {
  RoundRecord r;
  r.round = round;
  r.checkpoint_id = "round_" + std::to_string(round);
  r.validation = fairness_report(m, b.validation);
  r.test = fairness_report(m, b.test);
  r.val_accuracy = r.validation.accuracy;
  return r;
}

RunResult acquisition_loop(const SplitBundle& bundle, const FisConfig& cfg, std::string strategy,
                           const Selector& select) {
  CandidatePool pool = bundle.pool;
  pool.reset_budget();

  RunResult res;
  res.strategy = std::move(strategy);
  Mlp current = warm_start(bundle, cfg);
  RoundRecord r0 = describe(current, bundle, 0);
  r0.val_reference = r0.val_accuracy;
  r0.tolerance_threshold = r0.val_accuracy - cfg.tolerance;
  r0.training_size = bundle.train.size();
  const double val0 = r0.val_accuracy;
  double reference = val0;
  res.rounds.push_back(r0);
  res.checkpoints.push_back(current);
  if (cfg.keep_all_scores) res.all_scores.emplace_back();

  std::vector<bool> acquired(pool.size(), false);
  std::vector<TrainItem> items = train_items(bundle.train);

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    SelectionResult sel = select(current, acquired, t);

    RoundRecord rec;
    std::vector<InfluenceScore> chosen;
    std::vector<int> labels;
    for (std::size_t id : sel.selected) {
      const int y = pool.query_true_label(id);
      acquired[id] = true;
      items.push_back({pool.features(id), y, cfg.train.new_data_weight});
      labels.push_back(y);
      const auto it = std::find_if(sel.scores.begin(), sel.scores.end(),
                                   [id](const InfluenceScore& s) { return s.candidate_id == id; });
      InfluenceScore s;
      if (it != sel.scores.end()) {
        s = *it;
      } else {
        s.candidate_id = id;
        s.guessed_label = -1;
      }
      chosen.push_back(s);
    }

    TrainConfig tc = cfg.train;
    tc.epochs = cfg.retrain_epochs;
    tc.seed = derive_seed(cfg.seed, derive_seed(t, "retrain/shuffle"));
    Mlp start = current;
    if (cfg.retrain_from_scratch) {
      start = init_model(layer_sizes_for(bundle, cfg), derive_seed(cfg.seed, "init"));
      tc.epochs = cfg.train.epochs;
    }
    Mlp next = sgd_train(start, items, tc).model;

    rec = describe(next, bundle, t);
    rec.selected = std::move(chosen);
    rec.true_labels = std::move(labels);
    rec.val_reference = reference;
    rec.tolerance_threshold = reference - cfg.tolerance;
    rec.tolerated = rec.val_accuracy >= rec.tolerance_threshold;
    rec.in_output = rec.val_accuracy > val0;
    rec.budget_consumed = pool.budget_consumed();
    rec.training_size = items.size();
    if (rec.in_output) res.output_rounds.push_back(t);
    if (rec.tolerated) {
      current = next;
      reference = rec.val_accuracy;
      res.final_round = t;
    }
    res.rounds.push_back(std::move(rec));
    res.checkpoints.push_back(std::move(next));
    if (cfg.keep_all_scores) res.all_scores.push_back(std::move(sel.scores));
  }
  return res;
}

}  // namespace

RunResult fis_run(const SplitBundle& bundle, const FisConfig& cfg) {
  cfg.validate();
  check_bundle(bundle);
  if (bundle.pool.empty()) throw std::invalid_argument("candidate pool U is empty");
  const Selector select = [&](const Mlp& m, const std::vector<bool>& acquired, std::size_t) {
    const InfluenceScorer scorer(m, bundle.validation, cfg.metric, cfg.scoring_eta(),
                                 cfg.train.grad_scope);
    return fis_select_round(scorer, bundle.pool, acquired, cfg);
  };
  return acquisition_loop(bundle, cfg, "FIS", select);
}

namespace {

RunResult erm_run(const SplitBundle& bundle, const FisConfig& cfg) {
  RunResult res;
  res.strategy = "ERM";
  const Mlp m = warm_start(bundle, cfg);
  RoundRecord r0 = describe(m, bundle, 0);
  r0.val_reference = r0.val_accuracy;
  r0.tolerance_threshold = r0.val_accuracy - cfg.tolerance;
  r0.training_size = bundle.train.size();
  res.rounds.push_back(r0);
  res.checkpoints.push_back(m);
  return res;
}

RunResult jtt_run(const SplitBundle& bundle, const FisConfig& cfg) {
  RunResult res = erm_run(bundle, cfg);
  res.strategy = "JTT";
  const Mlp& first = res.checkpoints.front();
  std::vector<TrainItem> items = train_items(bundle.train);
  for (auto& it : items) {
    if (predict(first, it.features) != it.label) it.weight = cfg.jtt_lambda;
  }
  // Second stage reuses the warm-start initialization and shuffle seed, so
  // lambda = 1 reproduces plain training on P.
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "warm_start/shuffle");
  const Mlp init = init_model(layer_sizes_for(bundle, cfg), derive_seed(cfg.seed, "init"));
  Mlp second = sgd_train(init, items, tc).model;

  RoundRecord rec = describe(second, bundle, 1);
  const double val0 = res.rounds.front().val_accuracy;
  rec.val_reference = val0;
  rec.tolerance_threshold = val0 - cfg.tolerance;
  rec.tolerated = rec.val_accuracy >= rec.tolerance_threshold;
  rec.in_output = rec.val_accuracy > val0;
  rec.training_size = items.size();
  if (rec.in_output) res.output_rounds.push_back(1);
  if (rec.tolerated) res.final_round = 1;
  res.rounds.push_back(std::move(rec));
  res.checkpoints.push_back(std::move(second));
  return res;
}

}  // namespace

RunResult baseline_run(const SplitBundle& bundle, BaselineKind kind, const FisConfig& cfg) {
  cfg.validate();
  check_bundle(bundle);
  switch (kind) {
    case BaselineKind::ERM: return erm_run(bundle, cfg);
    case BaselineKind::JTT: return jtt_run(bundle, cfg);
    default: break;
  }
  if (bundle.pool.empty()) throw std::invalid_argument("candidate pool U is empty");

  Selector select;
  if (kind == BaselineKind::Random) {
    select = [&](const Mlp&, const std::vector<bool>& acquired, std::size_t t) {
      auto ids = open_candidates(bundle.pool, acquired);
      Rng rng(derive_seed(cfg.seed, derive_seed(t, "random/select")));
      SelectionResult res;
      const std::size_t take = std::min(cfg.budget_per_round, ids.size());
      for (std::size_t j = 0; j < take; ++j) {
        std::swap(ids[j], ids[j + rng.below(ids.size() - j)]);
        res.selected.push_back(ids[j]);
      }
      return res;
    };
  } else if (kind == BaselineKind::Uncertainty) {
    select = [&](const Mlp& m, const std::vector<bool>& acquired, std::size_t) {
      const auto ids = open_candidates(bundle.pool, acquired);
      std::vector<std::pair<double, std::size_t>> keyed(ids.size());
      parallel_for(ids.size(), cfg.threads, [&](std::size_t j) {
        keyed[j] = {-prediction_entropy(m, bundle.pool.features(ids[j])), ids[j]};
      });
      SelectionResult res;
      res.selected = top_by_key(keyed, cfg.budget_per_round);
      return res;
    };
  } else {
    select = [&](const Mlp& m, const std::vector<bool>& acquired, std::size_t) {
      const InfluenceScorer scorer(m, bundle.validation, cfg.metric, cfg.scoring_eta(),
                                   cfg.train.grad_scope);
      SelectionResult res;
      res.scores = score_candidates(scorer, bundle.pool, open_candidates(bundle.pool, acquired),
                                    cfg.label_strategy, cfg.threads);
      std::vector<std::pair<double, std::size_t>> keyed;
      keyed.reserve(res.scores.size());
      for (const auto& s : res.scores) keyed.emplace_back(s.infl_acc, s.candidate_id);
      res.selected = top_by_key(keyed, cfg.budget_per_round);
      return res;
    };
  }
  return acquisition_loop(bundle, cfg, std::string(to_string(kind)), select);
}

}  // namespace fis
