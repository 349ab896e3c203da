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

#include "fis/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "fis/fairness.hpp"
#include "fis/rng.hpp"

namespace fis {

double dist(std::span<const double> pA, std::span<const double> pB) {
  if (pA.size() != pB.size()) throw std::invalid_argument("dist: probability vectors differ in length");
  validate_probability_vector(pA, "dist: first vector");
  validate_probability_vector(pB, "dist: second vector");
  double s = 0.0;
  for (std::size_t i = 0; i < pA.size(); ++i) s += std::abs(pA[i] - pB[i]);
  return s;
}

namespace {

double mean_loss(const Mlp& m, std::span<const Example> xs) {
  if (xs.empty()) throw std::invalid_argument("mean loss over an empty sample");
  double s = 0.0;
  for (const auto& e : xs) s += example_loss(m, e);
  return s / static_cast<double>(xs.size());
}

/// Gradient of sum_i w_i * mean loss over samples[i].
std::vector<double> mixture_risk_grad(const Mlp& m, const std::vector<std::vector<Example>>& samples,
                                      std::span<const double> weights) {
  std::vector<double> g(m.num_params(), 0.0);
  std::vector<double> upstream;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (weights[i] == 0.0 || samples[i].empty()) continue;
    const double w = weights[i] / static_cast<double>(samples[i].size());
    for (const auto& e : samples[i]) {
      const auto t = trace_forward(m, e.features);
      upstream = t.probs;
      upstream[static_cast<std::size_t>(*e.label)] -= 1.0;
      accumulate_backward(m, t, upstream, w, g);
    }
  }
  return g;
}

}  // namespace

EmpiricalConstants estimate_constants(const Mlp& m, const ComponentMixture& mixture,
                                      std::size_t samples_per_component, std::uint64_t seed,
                                      const CurvatureProbe& probe) {
  if (samples_per_component == 0) throw std::invalid_argument("estimate_constants: zero samples");
  if (mixture.num_components() == 0) throw std::invalid_argument("estimate_constants: empty mixture");
  EmpiricalConstants c;
  c.samples_per_component = samples_per_component;
  c.curvature_pairs = probe.pairs;

  std::vector<std::vector<Example>> samples;
  for (std::size_t i = 0; i < mixture.num_components(); ++i) {
    samples.push_back(mixture.sample_component(i, samples_per_component, seed));
    const double loss = mean_loss(m, samples.back());
    c.component_loss.push_back(loss);
    c.max_component_loss = std::max(c.max_component_loss, loss);
    for (const auto& e : samples.back()) {
      c.max_grad_norm = std::max(c.max_grad_norm, norm(grad_example_loss(m, e).values));
    }
  }

  std::vector<double> weights = mixture.frequencies;
  if (weights.size() != samples.size()) weights.assign(samples.size(), 1.0 / samples.size());
  Rng rng(derive_seed(seed, "curvature"));
  for (std::size_t p = 0; p < probe.pairs; ++p) {
    Mlp v = m;
    Mlp w = m;
    auto pv = v.mutable_params();
    auto pw = w.mutable_params();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      pv[j] += probe.radius * rng.normal();
      pw[j] += probe.radius * rng.normal();
    }
    const auto gv = mixture_risk_grad(v, samples, weights);
    const auto gw = mixture_risk_grad(w, samples, weights);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < gv.size(); ++j) {
      num += (gv[j] - gw[j]) * (gv[j] - gw[j]);
      den += (pv[j] - pw[j]) * (pv[j] - pw[j]);
    }
    if (den > 0.0) c.smoothness = std::max(c.smoothness, std::sqrt(num / den));
  }
  return c;
}

void BoundConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("bounds.delta must lie in (0, 1); log(4/delta) is undefined otherwise");
  }
  if (samples_per_component == 0) throw std::invalid_argument("bounds.samples_per_component must be positive");
  if (reference_size == 0) throw std::invalid_argument("bounds.reference_size must be positive");
  train.validate();
}

double concentration_term(double delta, double n) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(n > 0.0)) throw std::invalid_argument("sample count must be positive");
  return std::sqrt(std::log(4.0 / delta) / (2.0 * n));
}

double generalization_rhs(double g_p, double dist_pq, double delta, double n_p, double train_risk) {
  return g_p * dist_pq + concentration_term(delta, n_p) + train_risk;
}

double group_gap_coefficient(double smoothness, double grad_bound, double eta, std::size_t steps) {
  const double l2 = smoothness * smoothness;
  const double ratio = eta * eta * (1.0 + 2.0 * eta * eta * l2);
  double sum = 0.0;
  double term = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    sum += term;
    term *= ratio;
  }
  return 4.0 * l2 * grad_bound * grad_bound * sum;
}

MixtureRisk mixture_risk(const Mlp& m, const Dataset& tagged, int num_components) {
  const auto freq = tagged.component_frequencies(num_components);
  std::vector<double> sum(freq.size(), 0.0);
  std::vector<double> count(freq.size(), 0.0);
  MixtureRisk r;
  for (const auto& e : tagged.examples()) {
    const double l = example_loss(m, e);
    r.direct += l;
    sum[static_cast<std::size_t>(*e.component)] += l;
    count[static_cast<std::size_t>(*e.component)] += 1.0;
  }
  r.direct /= static_cast<double>(tagged.size());
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (count[i] > 0.0) r.decomposed += freq[i] * (sum[i] / count[i]);
  }
  return r;
}

namespace {

Mlp fit(const Dataset& ds, const BoundConfig& cfg, std::string_view stage) {
  if (ds.empty()) throw std::invalid_argument("cannot fit a reference model on an empty sample");
  std::vector<std::size_t> sizes{ds.dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(static_cast<std::size_t>(ds.num_classes()));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, std::string(stage) + "/shuffle");
  const Mlp init = init_model(sizes, derive_seed(cfg.seed, std::string(stage) + "/init"));
  return sgd_train(init, train_items(ds), tc).model;
}

ComponentMixture restrict_to_group(const ComponentMixture& mix, int group) {
  ComponentMixture out = mix;
  double mass = 0.0;
  for (std::size_t i = 0; i < mix.num_components(); ++i) {
    if (mix.components[i].group != group) out.frequencies[i] = 0.0;
    mass += out.frequencies[i];
  }
  if (!(mass > 0.0)) {
    throw std::invalid_argument("group " + std::to_string(group) + " has no mixture mass");
  }
  for (double& f : out.frequencies) f /= mass;
  return out;
}

}  // namespace

BoundPair check_bounds(const MixtureDraw& draw, int group, const BoundConfig& cfg) {
  cfg.validate();
  const auto& P = draw.train;
  const auto& Q = draw.test;
  const int n_comp = static_cast<int>(draw.train_mixture.num_components());
  if (P.empty() || Q.empty()) throw std::invalid_argument("bound check needs nonempty P and Q");
  const auto freq_p = P.component_frequencies(n_comp);  // throws on missing tags
  const auto freq_q = Q.component_frequencies(n_comp);

  const Dataset Pk = P.group_subset(group);
  const Dataset Qk = Q.group_subset(group);
  if (Pk.empty()) throw std::invalid_argument("group " + std::to_string(group) + " has no train examples");
  if (Qk.empty()) throw std::invalid_argument("group " + std::to_string(group) + " has no test examples");
  const auto freq_pk = Pk.component_frequencies(n_comp);
  const auto freq_qk = Qk.component_frequencies(n_comp);

  const Mlp w_p = fit(P, cfg, "bounds/P");
  const Mlp w_k = fit(Pk, cfg, "bounds/Pk");

  const double risk_p = evaluate(w_p, P).mean_loss;
  std::vector<double> test_losses;
  test_losses.reserve(Q.size());
  for (const auto& e : Q.examples()) test_losses.push_back(example_loss(w_p, e));
  double risk_q = 0.0;
  for (double l : test_losses) risk_q += l;
  risk_q /= static_cast<double>(test_losses.size());
  const double disparity = risk_disparity(test_losses, Q.groups(), group);
  const double risk_pk = evaluate(w_k, Pk).mean_loss;

  const auto est_p = estimate_constants(w_p, draw.train_mixture, cfg.samples_per_component,
                                        derive_seed(cfg.seed, "bounds/constants/P"), cfg.probe);
  const auto est_k = estimate_constants(w_k, draw.train_mixture, cfg.samples_per_component,
                                        derive_seed(cfg.seed, "bounds/constants/Pk"),
                                        CurvatureProbe{0, cfg.probe.radius});

  // Ideal risks approximated by models fit directly on fresh target samples.
  const Dataset q_ref = draw.test_mixture.sample(cfg.reference_size, derive_seed(cfg.seed, "bounds/ref/Q"),
                                                 Q.num_classes(), Q.num_groups(), "reference/Q");
  const Dataset qk_ref = restrict_to_group(draw.test_mixture, group)
                             .sample(cfg.reference_size, derive_seed(cfg.seed, "bounds/ref/Qk"),
                                     Q.num_classes(), Q.num_groups(), "reference/Qk");
  const double ideal_q = evaluate(fit(q_ref, cfg, "bounds/ref/Q"), q_ref).mean_loss;
  const double ideal_qk = evaluate(fit(qk_ref, cfg, "bounds/ref/Qk"), qk_ref).mean_loss;

  const double n_p = static_cast<double>(P.size());
  const double n_pk = static_cast<double>(Pk.size());
  const double dist_pq = dist(freq_p, freq_q);
  const double dist_pkqk = dist(freq_pk, freq_qk);
  const double dist_pkp = dist(freq_pk, freq_p);
  const double G = est_p.max_grad_norm;
  const double L = est_p.smoothness;
  const double phi = group_gap_coefficient(L, G, cfg.train.learning_rate, cfg.train.epochs);
  const double varpi = risk_p - ideal_q;
  const double varpi_k = risk_pk - ideal_qk;
  const double upsilon =
      concentration_term(cfg.delta, n_p) + concentration_term(cfg.delta, n_pk) + varpi + varpi_k;

  const std::map<std::string, double> constants{
      {"G_P", est_p.max_component_loss},
      {"G_k", est_k.max_component_loss},
      {"G", G},
      {"L", L},
      {"Phi", phi},
      {"Upsilon", upsilon},
      {"varpi", varpi},
      {"varpi_k", varpi_k},
      {"dist_PQ", dist_pq},
      {"dist_PkQk", dist_pkqk},
      {"dist_PkP", dist_pkp},
      {"N_P", n_p},
      {"N_Pk", n_pk},
      {"delta", cfg.delta},
      {"T", static_cast<double>(cfg.train.epochs)},
      {"eta", cfg.train.learning_rate},
      {"R_P", risk_p},
      {"R_Q", risk_q},
      {"R_Pk", risk_pk},
      {"R_star_Q", ideal_q},
      {"R_star_Qk", ideal_qk},
      {"samples_per_component", static_cast<double>(cfg.samples_per_component)},
  };

  BoundPair out;
  out.generalization.kind = "generalization";
  out.generalization.lhs = risk_q;
  out.generalization.rhs = generalization_rhs(est_p.max_component_loss, dist_pq, cfg.delta, n_p, risk_p);
  out.generalization.slack = out.generalization.rhs - out.generalization.lhs;
  out.generalization.constants = constants;

  out.disparity.kind = "disparity";
  out.disparity.lhs = disparity;
  out.disparity.rhs = est_k.max_component_loss * dist_pkqk + est_p.max_component_loss * dist_pq +
                      phi * dist_pkp * dist_pkp + upsilon;
  out.disparity.slack = out.disparity.rhs - out.disparity.lhs;
  out.disparity.constants = constants;
  out.disparity.constants["group"] = group;
  out.generalization.constants["group"] = group;
  return out;
}

BoundReport check_generalization_bound(const MixtureDraw& draw, const BoundConfig& cfg) {
  // The group only feeds the disparity side; use the first one present in
  // both samples.
  for (int k = 0; k < draw.train.num_groups(); ++k) {
    if (!draw.train.group_subset(k).empty() && !draw.test.group_subset(k).empty()) {
      return check_bounds(draw, k, cfg).generalization;
    }
  }
  throw std::invalid_argument("no group is present in both P and Q");
}

BoundReport check_disparity_bound(const MixtureDraw& draw, int group, const BoundConfig& cfg) {
  return check_bounds(draw, group, cfg).disparity;
}

}  // namespace fis
