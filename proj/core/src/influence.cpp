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

#include "fis/influence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fis {

std::string_view to_string(LabelStrategy s) {
  switch (s) {
    case LabelStrategy::MinInfluence: return "MinInfluence";
    case LabelStrategy::MaxPrediction: return "MaxPrediction";
  }
  return "?";
}

LabelStrategy parse_label_strategy(std::string_view name) {
  if (name == "MinInfluence" || name == "min_influence") return LabelStrategy::MinInfluence;
  if (name == "MaxPrediction" || name == "max_prediction") return LabelStrategy::MaxPrediction;
  throw std::invalid_argument("unknown label strategy '" + std::string(name) +
                              "' (expected MinInfluence or MaxPrediction)");
}

namespace {

void check_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("influence step size eta must be finite and nonnegative");
  }
}

/// Loss gradient of (x, k) for every class k from a single forward pass.
std::vector<std::vector<double>> per_class_grads(const Mlp& m, std::span<const double> x,
                                                 const GradScope& scope) {
  const auto t = trace_forward(m, x);
  const std::size_t k_count = m.num_classes();
  std::vector<std::vector<double>> out(k_count, std::vector<double>(m.num_params(), 0.0));
  std::vector<double> upstream;
  for (std::size_t k = 0; k < k_count; ++k) {
    upstream = t.probs;
    upstream[k] -= 1.0;
    accumulate_backward(m, t, upstream, 1.0, out[k], scope);
  }
  return out;
}

int argmin_abs_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (std::abs(v[k]) < std::abs(v[best])) best = k;
  }
  return static_cast<int>(best);
}

}  // namespace

GradientVector validation_loss_grad(const Mlp& m, const Dataset& val, const GradScope& scope) {
  GradientVector g{std::vector<double>(m.num_params(), 0.0), scope};
  std::vector<double> upstream;
  for (const auto& e : val.examples()) {
    if (!e.label) throw std::invalid_argument("validation example " + std::to_string(e.id) +
                                              " has no label");
    const auto t = trace_forward(m, e.features);
    upstream = t.probs;
    upstream[static_cast<std::size_t>(*e.label)] -= 1.0;
    accumulate_backward(m, t, upstream, 1.0, g.values, scope);
  }
  return g;
}

double infl_acc(const Mlp& m, std::span<const double> x, int y_hyp, const Dataset& val, double eta,
                const GradScope& scope) {
  check_eta(eta);
  const auto g = grad_example_loss(m, x, y_hyp, scope);
  const auto v = validation_loss_grad(m, val, scope);
  return -eta * dot(g.values, v.values);
}

double infl_fair(const Mlp& m, std::span<const double> x, int y_hyp, const Dataset& val, double eta,
                 FairnessMetricKind kind, const GradScope& scope) {
  check_eta(eta);
  const auto g = grad_example_loss(m, x, y_hyp, scope);
  const auto f = surrogate_grad(m, val, kind, scope);
  return -eta * dot(g.values, f.values);
}

LabelGuess guess_label_min_influence(const Mlp& m, std::span<const double> x, const Dataset& val,
                                     double eta, const GradScope& scope) {
  check_eta(eta);
  const auto v = validation_loss_grad(m, val, scope);
  const auto grads = per_class_grads(m, x, scope);
  LabelGuess guess;
  for (const auto& g : grads) guess.per_class_influence.push_back(-eta * dot(g, v.values));
  guess.label = argmin_abs_lowest(guess.per_class_influence);
  return guess;
}

int guess_label_max_prediction(const Mlp& m, std::span<const double> x) { return predict(m, x); }

OracleResult exact_one_step_oracle(const Mlp& m, std::span<const double> x, int y_hyp,
                                   const Dataset& val, double eta, FairnessMetricKind kind,
                                   const GradScope& scope) {
  check_eta(eta);
  const auto g = grad_example_loss(m, x, y_hyp, scope);
  const auto vg = validation_loss_grad(m, val, scope);
  const auto fg = surrogate_grad(m, val, kind, scope);

  Mlp next = m;
  auto p = next.mutable_params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * g.values[i];

  OracleResult r;
  // Per-example differences keep cancellation error at the scale of each
  // loss rather than of the summed loss.
  for (const auto& e : val.examples()) r.delta_loss_exact += example_loss(next, e) - example_loss(m, e);
  r.delta_fair_exact = surrogate_value(next, val, kind) - surrogate_value(m, val, kind);
  r.first_order_loss = -eta * dot(g.values, vg.values);
  r.first_order_fair = -eta * dot(g.values, fg.values);
  return r;
}

InfluenceScorer::InfluenceScorer(Mlp snapshot, const Dataset& val, FairnessMetricKind kind,
                                 double eta, GradScope scope)
    : model_(std::move(snapshot)), kind_(kind), eta_(eta), scope_(scope) {
  check_eta(eta);
  val_grad_ = validation_loss_grad(model_, val, scope_);
  fair_grad_ = surrogate_grad(model_, val, kind_, scope_);
}

double InfluenceScorer::infl_acc(std::span<const double> x, int y_hyp) const {
  const auto g = grad_example_loss(model_, x, y_hyp, scope_);
  return -eta_ * dot(g.values, val_grad_.values);
}

double InfluenceScorer::infl_fair(std::span<const double> x, int y_hyp) const {
  const auto g = grad_example_loss(model_, x, y_hyp, scope_);
  return -eta_ * dot(g.values, fair_grad_.values);
}

LabelGuess InfluenceScorer::guess_min_influence(std::span<const double> x) const {
  const auto grads = per_class_grads(model_, x, scope_);
  LabelGuess guess;
  for (const auto& g : grads) guess.per_class_influence.push_back(-eta_ * dot(g, val_grad_.values));
  guess.label = argmin_abs_lowest(guess.per_class_influence);
  return guess;
}

int InfluenceScorer::guess_max_prediction(std::span<const double> x) const {
  return predict(model_, x);
}

InfluenceScore InfluenceScorer::score(std::size_t candidate_id, std::span<const double> x,
                                      LabelStrategy strategy) const {
  InfluenceScore s;
  s.candidate_id = candidate_id;
  s.strategy_used = strategy;
  const auto grads = per_class_grads(model_, x, scope_);
  if (strategy == LabelStrategy::MinInfluence) {
    std::vector<double> acc;
    acc.reserve(grads.size());
    for (const auto& g : grads) acc.push_back(-eta_ * dot(g, val_grad_.values));
    s.guessed_label = argmin_abs_lowest(acc);
    s.infl_acc = acc[static_cast<std::size_t>(s.guessed_label)];
  } else {
    s.guessed_label = predict(model_, x);
    s.infl_acc = -eta_ * dot(grads[static_cast<std::size_t>(s.guessed_label)], val_grad_.values);
  }
  s.infl_fair = -eta_ * dot(grads[static_cast<std::size_t>(s.guessed_label)], fair_grad_.values);
  return s;
}

}  // namespace fis
