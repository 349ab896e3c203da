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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fis {

/// One record z = (x, y, a). `id` is the record identity used for
/// disjointness checks; `component` is the hidden mixture tag carried by
/// synthetic data only.
struct Example {
  std::size_t id = 0;
  std::vector<double> features;
  std::optional<int> label;
  std::optional<int> group;
  std::optional<int> component;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::size_t dim, int num_classes, int num_groups);

  /// Validates dimension and label/group ranges before appending.
  void add(Example ex);

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  int num_classes() const { return num_classes_; }
  int num_groups() const { return num_groups_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::span<const Example> examples() const { return examples_; }

  bool fully_labeled() const;
  bool fully_grouped() const;

  Dataset subset(std::span<const std::size_t> indices, std::string name) const;
  /// Examples whose group equals `group`, original order preserved.
  Dataset group_subset(int group) const;
  /// Copy with every group id removed.
  Dataset without_groups() const;

  /// Empirical frequency of each component tag in [0, num_components).
  /// Throws if any example lacks a tag.
  std::vector<double> component_frequencies(int num_components) const;

  std::vector<int> labels() const;
  std::vector<int> groups() const;

 private:
  std::string name_;
  std::size_t dim_ = 0;
  int num_classes_ = 2;
  int num_groups_ = 2;
  std::vector<Example> examples_;
};

/// Hidden-label candidate pool. Features are readable; labels and groups are
/// only reachable through query_true_label, which charges the label budget.
class CandidatePool {
 public:
  CandidatePool() = default;
  explicit CandidatePool(Dataset hidden);

  std::size_t size() const { return hidden_.size(); }
  bool empty() const { return hidden_.empty(); }
  std::size_t dim() const { return hidden_.dim(); }
  int num_classes() const { return hidden_.num_classes(); }
  std::span<const double> features(std::size_t candidate_id) const;
  std::size_t record_id(std::size_t candidate_id) const;

  /// Ground-truth label; the budget counts distinct ids queried.
  int query_true_label(std::size_t candidate_id);
  std::size_t budget_consumed() const { return consumed_; }
  bool was_queried(std::size_t candidate_id) const;
  void reset_budget();

  /// Applies an affine feature map (used for train-fitted standardization).
  void transform_features(std::span<const double> mean, std::span<const double> scale);

 private:
  Dataset hidden_;
  std::vector<bool> queried_;
  std::size_t consumed_ = 0;
};

struct SplitBundle {
  Dataset train;            // P: labels visible, groups hidden
  CandidatePool pool;       // U
  Dataset validation;       // Q_v
  Dataset test;             // Q
};

struct SplitFractions {
  double train = 0.2;
  double pool = 0.6;
  double validation = 0.1;
  double test = 0.1;
};

struct CsvSchema {
  std::vector<std::string> features;
  std::optional<std::string> label;
  std::optional<std::string> group;
  /// Declared class/group counts; inferred from the data when absent.
  std::optional<int> num_classes;
  std::optional<int> num_groups;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

SplitBundle split(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed);

/// Zero-mean, unit-variance feature scaling fitted on train_P and applied
/// to every part of the bundle. Constant columns keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& ds);
  Dataset apply(const Dataset& ds) const;
};
SplitBundle standardize(SplitBundle bundle);

/// Random oversampling with replacement until every (class, group) cell
/// matches the largest cell.
Dataset balance_oversample(const Dataset& ds, std::uint64_t seed);

struct MixtureComponent {
  std::vector<double> mean;
  double sigma = 1.0;
  int label = 0;
  int group = 0;
};

struct ComponentMixture {
  std::vector<MixtureComponent> components;
  std::vector<double> frequencies;

  std::size_t num_components() const { return components.size(); }
  std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
  /// Deterministic sample stream per component: the j-th draw of component
  /// i depends only on (seed, i, j), so larger sample sets extend smaller ones.
  std::vector<Example> sample_component(std::size_t component, std::size_t count,
                                        std::uint64_t seed) const;
  Dataset sample(std::size_t count, std::uint64_t seed, int num_classes, int num_groups,
                 std::string name) const;
};

struct MixtureSpec {
  int num_components = 4;
  std::size_t dim = 2;
  int num_classes = 2;
  int num_groups = 2;
  std::vector<double> frequencies_train;
  std::vector<double> frequencies_test;
  std::size_t train_size = 10000;
  std::size_t test_size = 10000;
  /// Scale of the random component means.
  double separation = 2.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct MixtureDraw {
  Dataset train;
  Dataset test;
  ComponentMixture train_mixture;
  ComponentMixture test_mixture;
};

/// Component i is a Gaussian with class i mod K and group (i / K) mod A.
MixtureDraw make_synthetic_mixture(const MixtureSpec& spec);

void validate_probability_vector(std::span<const double> p, const char* what);

/// Two-group tabular fixture with a group-dependent decision threshold.
/// Group 0 follows y = [x1 > 0]; group 1 has x1 shifted by -shift and
/// follows y = [x1 > -shift], so a model fit mostly on group 0 under-predicts
/// positives for group 1. Feature x0 carries a noisy group signal.
struct GroupShiftSpec {
  std::size_t dim = 6;
  std::size_t train_size = 500;
  std::size_t pool_size = 4000;
  std::size_t validation_size = 300;
  std::size_t test_size = 1000;
  double train_group1_fraction = 0.05;
  double group1_fraction = 0.5;
  double shift = 1.0;
  double group_signal = 1.5;
  double label_noise = 0.05;
};

Dataset sample_group_shift(const GroupShiftSpec& spec, std::size_t count,
                           double group1_fraction, std::uint64_t seed, std::string name,
                           std::size_t first_id);
SplitBundle make_group_shift_bundle(const GroupShiftSpec& spec, std::uint64_t seed);

}  // namespace fis
