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

#include "fis/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fis {

std::string_view to_string(FairnessMetricKind kind) {
  switch (kind) {
    case FairnessMetricKind::DP: return "DP";
    case FairnessMetricKind::EOp: return "EOp";
    case FairnessMetricKind::EOd: return "EOd";
  }
  return "?";
}

FairnessMetricKind parse_metric_kind(std::string_view name) {
  if (name == "DP" || name == "dp") return FairnessMetricKind::DP;
  if (name == "EOp" || name == "eop") return FairnessMetricKind::EOp;
  if (name == "EOd" || name == "eod") return FairnessMetricKind::EOd;
  throw std::invalid_argument("unknown fairness metric '" + std::string(name) +
                              "' (expected DP, EOp or EOd)");
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("predictions, labels and groups must have equal lengths");
}

void check_group(int g, int num_groups) {
  if (g < 0 || g >= num_groups) {
    throw std::invalid_argument("group id " + std::to_string(g) + " out of range [0, " +
                                std::to_string(num_groups) + ")");
  }
}

/// Max pairwise gap of P(pred == 1) within each group, restricted to
/// examples whose label equals `condition` (or all examples when negative).
double rate_gap(std::span<const int> predictions, std::span<const int> labels,
                std::span<const int> groups, int num_groups, int condition, const char* what) {
  if (num_groups < 2) throw std::invalid_argument("fairness gaps need at least 2 groups");
  std::vector<double> hits(static_cast<std::size_t>(num_groups), 0.0);
  std::vector<double> counts(static_cast<std::size_t>(num_groups), 0.0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    check_group(groups[i], num_groups);
    if (condition >= 0 && labels[i] != condition) continue;
    const auto g = static_cast<std::size_t>(groups[i]);
    counts[g] += 1.0;
    if (predictions[i] == 1) hits[g] += 1.0;
  }
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t g = 0; g < counts.size(); ++g) {
    if (counts[g] == 0.0) {
      throw std::invalid_argument("group " + std::to_string(g) + " has no " + what);
    }
    const double r = hits[g] / counts[g];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi - lo;
}

}  // namespace

double dp_gap(std::span<const int> predictions, std::span<const int> groups, int num_groups) {
  check_lengths(predictions.size(), groups.size());
  return rate_gap(predictions, {}, groups, num_groups, -1, "examples");
}

double eop_gap(std::span<const int> predictions, std::span<const int> labels,
               std::span<const int> groups, int num_groups) {
  check_lengths(predictions.size(), labels.size());
  check_lengths(predictions.size(), groups.size());
  return rate_gap(predictions, labels, groups, num_groups, 1, "positive-label examples");
}

double eod_gap(std::span<const int> predictions, std::span<const int> labels,
               std::span<const int> groups, int num_groups) {
  check_lengths(predictions.size(), labels.size());
  check_lengths(predictions.size(), groups.size());
  const double tpr = rate_gap(predictions, labels, groups, num_groups, 1, "positive-label examples");
  const double fpr = rate_gap(predictions, labels, groups, num_groups, 0, "negative-label examples");
  return 0.5 * (tpr + fpr);
}

double risk_disparity(std::span<const double> losses, std::span<const int> groups, int k) {
  if (losses.size() != groups.size()) throw std::invalid_argument("losses and groups differ in length");
  if (losses.empty()) throw std::invalid_argument("risk_disparity: empty set");
  double total = 0.0;
  double in_group = 0.0;
  std::size_t n_group = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    total += losses[i];
    if (groups[i] == k) {
      in_group += losses[i];
      ++n_group;
    }
  }
  if (n_group == 0) throw std::invalid_argument("risk_disparity: group " + std::to_string(k) + " is empty");
  return in_group / static_cast<double>(n_group) - total / static_cast<double>(losses.size());
}

double risk_disparity(const Mlp& m, const Dataset& test, int k) {
  if (k < 0 || k >= test.num_groups()) {
    throw std::invalid_argument("risk_disparity: group " + std::to_string(k) + " out of range");
  }
  std::vector<double> losses;
  losses.reserve(test.size());
  for (const auto& e : test.examples()) losses.push_back(example_loss(m, e));
  return risk_disparity(losses, test.groups(), k);
}

FairnessReport fairness_report(const Mlp& m, const Dataset& ds) {
  FairnessReport r;
  const auto preds = predict_all(m, ds);
  const auto labels = ds.labels();
  const auto groups = ds.groups();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
  r.accuracy = ds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(ds.size());
  const int a = ds.num_groups();
  auto attempt = [](auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };
  r.dp_gap = attempt([&] { return dp_gap(preds, groups, a); });
  r.eop_gap = attempt([&] { return eop_gap(preds, labels, groups, a); });
  r.eod_gap = attempt([&] { return eod_gap(preds, labels, groups, a); });
  if (!ds.empty()) {
    std::vector<double> losses;
    losses.reserve(ds.size());
    for (const auto& e : ds.examples()) losses.push_back(example_loss(m, e));
    for (int k = 0; k < a; ++k) {
      if (auto v = attempt([&] { return risk_disparity(losses, groups, k); })) {
        r.risk_disparity_per_group[k] = *v;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

/// Per-group means of p(y=1|x) over examples with label == condition (all
/// when condition < 0), optionally with the gradients of those means.
struct GroupMeans {
  std::vector<double> mean;
  std::vector<std::vector<double>> grad;  // empty unless requested
};

GroupMeans group_means(const Mlp& m, const Dataset& val, int condition, bool with_grad,
                       const GradScope& scope) {
  if (val.empty()) throw std::invalid_argument("fairness surrogate on empty validation set");
  const int a = val.num_groups();
  const auto na = static_cast<std::size_t>(a);
  GroupMeans out;
  out.mean.assign(na, 0.0);
  std::vector<double> count(na, 0.0);
  if (with_grad) out.grad.assign(na, std::vector<double>(m.num_params(), 0.0));
  std::vector<double> upstream(m.num_classes());

  for (const auto& e : val.examples()) {
    if (!e.group) throw std::invalid_argument("fairness surrogate needs grouped validation data");
    if (condition >= 0) {
      if (!e.label) throw std::invalid_argument("fairness surrogate needs labeled validation data");
      if (*e.label != condition) continue;
    }
    const auto g = static_cast<std::size_t>(*e.group);
    const auto t = trace_forward(m, e.features);
    const double p1 = t.probs[1];
    out.mean[g] += p1;
    count[g] += 1.0;
    if (with_grad) {
      // d p1 / d z_j = p1 (1[j == 1] - p_j)
      for (std::size_t j = 0; j < upstream.size(); ++j) upstream[j] = -p1 * t.probs[j];
      upstream[1] += p1;
      accumulate_backward(m, t, upstream, 1.0, out.grad[g], scope);
    }
  }
  for (std::size_t g = 0; g < na; ++g) {
    if (count[g] == 0.0) {
      throw std::invalid_argument(
          "fairness surrogate: group " + std::to_string(g) + " has no " +
          (condition < 0 ? std::string("examples")
                         : condition == 1 ? std::string("positive-label examples")
                                          : std::string("negative-label examples")) +
          " in the validation set");
    }
    out.mean[g] /= count[g];
    if (with_grad) {
      for (double& v : out.grad[g]) v /= count[g];
    }
  }
  return out;
}

std::vector<int> conditions_for(FairnessMetricKind kind) {
  switch (kind) {
    case FairnessMetricKind::DP: return {-1};
    case FairnessMetricKind::EOp: return {1};
    case FairnessMetricKind::EOd: return {1, 0};
  }
  return {};
}

std::pair<std::size_t, std::size_t> extreme_groups(const std::vector<double>& mean) {
  std::size_t hi = 0;
  std::size_t lo = 0;
  for (std::size_t g = 1; g < mean.size(); ++g) {
    if (mean[g] > mean[hi]) hi = g;
    if (mean[g] < mean[lo]) lo = g;
  }
  return {hi, lo};
}

void check_two_groups(const Dataset& val) {
  if (val.num_groups() != 2) {
    throw std::invalid_argument("signed surrogate gap is defined for exactly two groups");
  }
}

}  // namespace

double surrogate_value(const Mlp& m, const Dataset& val, FairnessMetricKind kind) {
  const auto conds = conditions_for(kind);
  double total = 0.0;
  for (int c : conds) {
    const auto gm = group_means(m, val, c, false, {});
    const auto [hi, lo] = extreme_groups(gm.mean);
    total += gm.mean[hi] - gm.mean[lo];
  }
  return total / static_cast<double>(conds.size());
}

GradientVector surrogate_grad(const Mlp& m, const Dataset& val, FairnessMetricKind kind,
                              const GradScope& scope) {
  const auto conds = conditions_for(kind);
  const double w = 1.0 / static_cast<double>(conds.size());
  GradientVector out{std::vector<double>(m.num_params(), 0.0), scope};
  for (int c : conds) {
    const auto gm = group_means(m, val, c, true, scope);
    const auto [hi, lo] = extreme_groups(gm.mean);
    if (gm.mean[hi] - gm.mean[lo] == 0.0) continue;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += w * (gm.grad[hi][i] - gm.grad[lo][i]);
    }
  }
  return out;
}

double surrogate_signed_gap(const Mlp& m, const Dataset& val, FairnessMetricKind kind) {
  check_two_groups(val);
  const auto conds = conditions_for(kind);
  double total = 0.0;
  for (int c : conds) {
    const auto gm = group_means(m, val, c, false, {});
    total += gm.mean[0] - gm.mean[1];
  }
  return total / static_cast<double>(conds.size());
}

GradientVector surrogate_signed_grad(const Mlp& m, const Dataset& val, FairnessMetricKind kind,
                                     const GradScope& scope) {
  check_two_groups(val);
  const auto conds = conditions_for(kind);
  const double w = 1.0 / static_cast<double>(conds.size());
  GradientVector out{std::vector<double>(m.num_params(), 0.0), scope};
  for (int c : conds) {
    const auto gm = group_means(m, val, c, true, scope);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += w * (gm.grad[0][i] - gm.grad[1][i]);
    }
  }
  return out;
}

}  // namespace fis
