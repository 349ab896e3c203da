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

#include "serialize.hpp"

#include <cstdio>
#include <stdexcept>

namespace fis {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* block) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string("unknown field '") + block + "." + key + "'");
  }
}

}  // namespace

json to_json(const FairnessReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["dp_gap"] = optional_number(r.dp_gap);
  j["eop_gap"] = optional_number(r.eop_gap);
  j["eod_gap"] = optional_number(r.eod_gap);
  json rd = json::object();
  for (const auto& [g, v] : r.risk_disparity_per_group) rd[std::to_string(g)] = v;
  j["risk_disparity_per_group"] = rd;
  return j;
}

json to_json(const InfluenceScore& s) {
  json j;
  j["candidate_id"] = s.candidate_id;
  j["guessed_label"] = s.guessed_label;
  j["infl_acc"] = s.infl_acc;
  j["infl_fair"] = s.infl_fair;
  j["strategy"] = std::string(to_string(s.strategy_used));
  return j;
}

json to_json(const OracleResult& r) {
  json j;
  j["delta_loss_exact"] = r.delta_loss_exact;
  j["first_order_loss"] = r.first_order_loss;
  j["delta_fair_exact"] = r.delta_fair_exact;
  j["first_order_fair"] = r.first_order_fair;
  return j;
}

json to_json(const RoundRecord& r) {
  json j;
  j["round"] = r.round;
  json sel = json::array();
  for (std::size_t i = 0; i < r.selected.size(); ++i) {
    json s = to_json(r.selected[i]);
    if (i < r.true_labels.size()) s["true_label"] = r.true_labels[i];
    sel.push_back(std::move(s));
  }
  j["selected"] = std::move(sel);
  j["checkpoint_id"] = r.checkpoint_id;
  j["val_accuracy"] = r.val_accuracy;
  j["val_reference"] = r.val_reference;
  j["tolerance_threshold"] = r.tolerance_threshold;
  j["tolerated"] = r.tolerated;
  j["in_output"] = r.in_output;
  j["validation"] = to_json(r.validation);
  j["test"] = to_json(r.test);
  j["budget_consumed"] = r.budget_consumed;
  j["training_size"] = r.training_size;
  return j;
}

json to_json(const BoundReport& r) {
  json j;
  j["kind"] = r.kind;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  json c = json::object();
  for (const auto& [k, v] : r.constants) c[k] = v;
  j["constants"] = std::move(c);
  return j;
}

json to_json(const TrainConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["new_data_weight"] = c.new_data_weight;
  j["grad_scope_last_layers"] = c.grad_scope.last_layers;
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j, {"learning_rate", "epochs", "batch_size", "new_data_weight",
                     "grad_scope_last_layers"}, "train");
  read_if(j, "learning_rate", c.learning_rate);
  read_if(j, "epochs", c.epochs);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "new_data_weight", c.new_data_weight);
  read_if(j, "grad_scope_last_layers", c.grad_scope.last_layers);
  return c;
}

json to_json(const FisConfig& c) {
  json j;
  j["rounds"] = c.rounds;
  j["budget_per_round"] = c.budget_per_round;
  j["tolerance"] = c.tolerance;
  j["metric"] = std::string(to_string(c.metric));
  j["label_strategy"] = std::string(to_string(c.label_strategy));
  j["hidden"] = c.hidden;
  j["retrain_epochs"] = c.retrain_epochs;
  j["retrain_from_scratch"] = c.retrain_from_scratch;
  j["influence_eta"] = c.scoring_eta();
  j["jtt_lambda"] = c.jtt_lambda;
  j["keep_all_scores"] = c.keep_all_scores;
  return j;
}

FisConfig fis_config_from_json(const json& j, FisConfig c) {
  reject_unknown(j, {"rounds", "budget_per_round", "tolerance", "metric", "label_strategy", "hidden",
                     "retrain_epochs", "retrain_from_scratch", "influence_eta", "jtt_lambda",
                     "keep_all_scores"}, "fis");
  // Signed reads so that negative values reach validate() instead of wrapping.
  auto read_count = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<long long>();
    if (v < 0) throw std::invalid_argument(std::string("fis.") + key + " must be nonnegative");
    out = static_cast<std::size_t>(v);
  };
  read_count("rounds", c.rounds);
  read_count("budget_per_round", c.budget_per_round);
  read_count("retrain_epochs", c.retrain_epochs);
  read_if(j, "tolerance", c.tolerance);
  if (j.contains("metric")) c.metric = parse_metric_kind(j.at("metric").get<std::string>());
  if (j.contains("label_strategy")) {
    c.label_strategy = parse_label_strategy(j.at("label_strategy").get<std::string>());
  }
  read_if(j, "hidden", c.hidden);
  read_if(j, "retrain_from_scratch", c.retrain_from_scratch);
  if (j.contains("influence_eta") && !j.at("influence_eta").is_null()) {
    c.influence_eta = j.at("influence_eta").get<double>();
  }
  read_if(j, "jtt_lambda", c.jtt_lambda);
  read_if(j, "keep_all_scores", c.keep_all_scores);
  return c;
}

json to_json(const BoundConfig& c) {
  json j;
  j["delta"] = c.delta;
  j["hidden"] = c.hidden;
  j["train"] = to_json(c.train);
  j["samples_per_component"] = c.samples_per_component;
  j["reference_size"] = c.reference_size;
  j["curvature_pairs"] = c.probe.pairs;
  j["curvature_radius"] = c.probe.radius;
  return j;
}

BoundConfig bound_config_from_json(const json& j, BoundConfig c) {
  reject_unknown(j, {"delta", "hidden", "train", "samples_per_component", "reference_size",
                     "curvature_pairs", "curvature_radius", "trials", "group",
                     "sweep_test_frequencies"}, "bounds");
  read_if(j, "delta", c.delta);
  read_if(j, "hidden", c.hidden);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  read_if(j, "samples_per_component", c.samples_per_component);
  read_if(j, "reference_size", c.reference_size);
  read_if(j, "curvature_pairs", c.probe.pairs);
  read_if(j, "curvature_radius", c.probe.radius);
  return c;
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fis
