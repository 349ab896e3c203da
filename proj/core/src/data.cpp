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

#include "fis/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "fis/rng.hpp"

namespace fis {

Dataset::Dataset(std::string name, std::size_t dim, int num_classes, int num_groups)
    : name_(std::move(name)), dim_(dim), num_classes_(num_classes), num_groups_(num_groups) {
  if (num_classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  if (num_groups < 2) throw std::invalid_argument("dataset needs at least 2 groups");
}

void Dataset::add(Example ex) {
  if (ex.features.size() != dim_) {
    throw std::invalid_argument("example " + std::to_string(ex.id) + " has " +
                                std::to_string(ex.features.size()) + " features, dataset '" +
                                name_ + "' expects " + std::to_string(dim_));
  }
  if (ex.label && (*ex.label < 0 || *ex.label >= num_classes_)) {
    throw std::invalid_argument("label out of range: " + std::to_string(*ex.label) +
                                " not in [0, " + std::to_string(num_classes_) + ")");
  }
  if (ex.group && (*ex.group < 0 || *ex.group >= num_groups_)) {
    throw std::invalid_argument("group out of range: " + std::to_string(*ex.group) +
                                " not in [0, " + std::to_string(num_groups_) + ")");
  }
  examples_.push_back(std::move(ex));
}

bool Dataset::fully_labeled() const {
  return std::all_of(examples_.begin(), examples_.end(),
                     [](const Example& e) { return e.label.has_value(); });
}

bool Dataset::fully_grouped() const {
  return std::all_of(examples_.begin(), examples_.end(),
                     [](const Example& e) { return e.group.has_value(); });
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string name) const {
  Dataset out(std::move(name), dim_, num_classes_, num_groups_);
  out.examples_.reserve(indices.size());
  for (std::size_t i : indices) out.examples_.push_back(examples_.at(i));
  return out;
}

Dataset Dataset::group_subset(int group) const {
  if (group < 0 || group >= num_groups_) {
    throw std::invalid_argument("group " + std::to_string(group) + " out of range");
  }
  Dataset out(name_ + "/group" + std::to_string(group), dim_, num_classes_, num_groups_);
  for (const auto& e : examples_) {
    if (e.group && *e.group == group) out.examples_.push_back(e);
  }
  return out;
}

Dataset Dataset::without_groups() const {
  Dataset out = *this;
  for (auto& e : out.examples_) e.group.reset();
  return out;
}

std::vector<double> Dataset::component_frequencies(int num_components) const {
  if (num_components <= 0) throw std::invalid_argument("num_components must be positive");
  std::vector<double> freq(static_cast<std::size_t>(num_components), 0.0);
  if (examples_.empty()) throw std::invalid_argument("component frequencies of empty dataset");
  for (const auto& e : examples_) {
    if (!e.component) {
      throw std::invalid_argument("example " + std::to_string(e.id) + " has no component tag");
    }
    if (*e.component < 0 || *e.component >= num_components) {
      throw std::invalid_argument("component tag out of range");
    }
    freq[static_cast<std::size_t>(*e.component)] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(examples_.size());
  return freq;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) {
    if (!e.label) throw std::invalid_argument("dataset '" + name_ + "' has unlabeled examples");
    out.push_back(*e.label);
  }
  return out;
}

std::vector<int> Dataset::groups() const {
  std::vector<int> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) {
    if (!e.group) throw std::invalid_argument("dataset '" + name_ + "' has ungrouped examples");
    out.push_back(*e.group);
  }
  return out;
}

// ---------------------------------------------------------------------------

CandidatePool::CandidatePool(Dataset hidden)
    : hidden_(std::move(hidden)), queried_(hidden_.size(), false) {
  if (!hidden_.fully_labeled()) {
    throw std::invalid_argument("candidate pool requires ground-truth labels for every record");
  }
}

std::span<const double> CandidatePool::features(std::size_t candidate_id) const {
  if (candidate_id >= hidden_.size()) {
    throw std::out_of_range("candidate id " + std::to_string(candidate_id) + " out of range");
  }
  return hidden_[candidate_id].features;
}

std::size_t CandidatePool::record_id(std::size_t candidate_id) const {
  if (candidate_id >= hidden_.size()) {
    throw std::out_of_range("candidate id " + std::to_string(candidate_id) + " out of range");
  }
  return hidden_[candidate_id].id;
}

int CandidatePool::query_true_label(std::size_t candidate_id) {
  if (candidate_id >= hidden_.size()) {
    throw std::out_of_range("candidate id " + std::to_string(candidate_id) + " out of range [0, " +
                            std::to_string(hidden_.size()) + ")");
  }
  if (!queried_[candidate_id]) {
    queried_[candidate_id] = true;
    ++consumed_;
  }
  return *hidden_[candidate_id].label;
}

bool CandidatePool::was_queried(std::size_t candidate_id) const {
  return candidate_id < queried_.size() && queried_[candidate_id];
}

void CandidatePool::reset_budget() {
  std::fill(queried_.begin(), queried_.end(), false);
  consumed_ = 0;
}

void CandidatePool::transform_features(std::span<const double> mean,
                                       std::span<const double> scale) {
  Standardizer s{{mean.begin(), mean.end()}, {scale.begin(), scale.end()}};
  hidden_ = s.apply(hidden_);
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest = line;
  while (true) {
    const auto pos = rest.find(',');
    cells.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return cells;
}

double parse_real(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(v)) {
    throw std::invalid_argument("non-numeric feature cell '" + cell + "' at row " +
                                std::to_string(row) + ", column '" + column + "'");
  }
  return v;
}

int parse_index(const std::string& cell, std::size_t row, const std::string& column) {
  int v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty() || v < 0) {
    throw std::invalid_argument("invalid index cell '" + cell + "' at row " + std::to_string(row) +
                                ", column '" + column + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
  if (schema.features.empty()) throw std::invalid_argument("schema declares no feature columns");

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV file has no header: " + path.string());
  const auto header = split_row(line);
  auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::invalid_argument("schema column '" + name + "' not found in header of " +
                                  path.string());
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column_index(f));
  const std::optional<std::size_t> label_col =
      schema.label ? std::optional(column_index(*schema.label)) : std::nullopt;
  const std::optional<std::size_t> group_col =
      schema.group ? std::optional(column_index(*schema.group)) : std::nullopt;

  std::vector<Example> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(header.size()));
    }
    Example ex;
    ex.id = rows.size();
    ex.features.reserve(feature_cols.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      ex.features.push_back(parse_real(cells[feature_cols[j]], row, schema.features[j]));
    }
    if (label_col) ex.label = parse_index(cells[*label_col], row, *schema.label);
    if (group_col) ex.group = parse_index(cells[*group_col], row, *schema.group);
    rows.push_back(std::move(ex));
  }

  int k = schema.num_classes.value_or(2);
  int a = schema.num_groups.value_or(2);
  if (!schema.num_classes) {
    for (const auto& e : rows) k = std::max(k, e.label.value_or(0) + 1);
  }
  if (!schema.num_groups) {
    for (const auto& e : rows) a = std::max(a, e.group.value_or(0) + 1);
  }
  Dataset ds(path.stem().string(), feature_cols.size(), k, a);
  for (auto& e : rows) ds.add(std::move(e));
  return ds;
}

// ---------------------------------------------------------------------------

SplitBundle split(const Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
  const double parts[] = {f.train, f.pool, f.validation, f.test};
  double total = 0.0;
  for (double p : parts) {
    if (!(p >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions sum to " + std::to_string(total) + ", expected 1");
  }

  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = count(f.train);
  const std::size_t n_pool = std::min(n - n_train, count(f.pool));
  const std::size_t n_val = std::min(n - n_train - n_pool, count(f.validation));
  const auto b = order.begin();
  const std::vector<std::size_t> i_train(b, b + n_train);
  const std::vector<std::size_t> i_pool(b + n_train, b + n_train + n_pool);
  const std::vector<std::size_t> i_val(b + n_train + n_pool, b + n_train + n_pool + n_val);
  const std::vector<std::size_t> i_test(b + n_train + n_pool + n_val, order.end());

  SplitBundle out;
  out.train = ds.subset(i_train, ds.name() + "/train").without_groups();
  out.pool = CandidatePool(ds.subset(i_pool, ds.name() + "/pool"));
  out.validation = ds.subset(i_val, ds.name() + "/validation");
  out.test = ds.subset(i_test, ds.name() + "/test");
  return out;
}

Standardizer Standardizer::fit(const Dataset& ds) {
  const std::size_t d = ds.dim();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (ds.empty()) return s;
  const double n = static_cast<double>(ds.size());
  for (const auto& e : ds.examples()) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += e.features[j];
  }
  for (double& m : s.mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (const auto& e : ds.examples()) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = e.features[j] - s.mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  if (mean.size() != ds.dim() || scale.size() != ds.dim()) {
    throw std::invalid_argument("standardizer dimension mismatch");
  }
  Dataset out(ds.name(), ds.dim(), ds.num_classes(), ds.num_groups());
  for (Example e : ds.examples()) {
    for (std::size_t j = 0; j < e.features.size(); ++j) {
      e.features[j] = (e.features[j] - mean[j]) / scale[j];
    }
    out.add(std::move(e));
  }
  return out;
}

SplitBundle standardize(SplitBundle bundle) {
  const Standardizer s = Standardizer::fit(bundle.train);
  bundle.train = s.apply(bundle.train);
  bundle.validation = s.apply(bundle.validation);
  bundle.test = s.apply(bundle.test);
  bundle.pool.transform_features(s.mean, s.scale);
  return bundle;
}

// ---------------------------------------------------------------------------

Dataset balance_oversample(const Dataset& ds, std::uint64_t seed) {
  const int k = ds.num_classes();
  const int a = ds.num_groups();
  std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(k * a));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = ds[i];
    if (!e.label || !e.group) {
      throw std::invalid_argument("balance_oversample requires labels and groups on every example");
    }
    cells[static_cast<std::size_t>(*e.label * a + *e.group)].push_back(i);
  }
  std::size_t target = 0;
  for (int y = 0; y < k; ++y) {
    for (int g = 0; g < a; ++g) {
      const auto& cell = cells[static_cast<std::size_t>(y * a + g)];
      if (cell.empty()) {
        throw std::invalid_argument("cannot balance: cell (class " + std::to_string(y) +
                                    ", group " + std::to_string(g) + ") is empty");
      }
      target = std::max(target, cell.size());
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> picks;
  picks.reserve(target * cells.size());
  for (const auto& cell : cells) {
    picks.insert(picks.end(), cell.begin(), cell.end());
    for (std::size_t extra = cell.size(); extra < target; ++extra) {
      picks.push_back(cell[rng.below(cell.size())]);
    }
  }
  return ds.subset(picks, ds.name() + "/balanced");
}

// ---------------------------------------------------------------------------

void validate_probability_vector(std::span<const double> p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + " sums to " + std::to_string(total) +
                                ", expected 1");
  }
}

std::vector<Example> ComponentMixture::sample_component(std::size_t component, std::size_t count,
                                                        std::uint64_t seed) const {
  const auto& c = components.at(component);
  std::vector<Example> out;
  out.reserve(count);
  const std::uint64_t stream = derive_seed(seed, static_cast<std::uint64_t>(component));
  for (std::size_t j = 0; j < count; ++j) {
    Rng rng(derive_seed(stream, static_cast<std::uint64_t>(j)));
    Example ex;
    ex.id = j;
    ex.features.resize(c.mean.size());
    for (std::size_t t = 0; t < c.mean.size(); ++t) ex.features[t] = c.mean[t] + c.sigma * rng.normal();
    ex.label = c.label;
    ex.group = c.group;
    ex.component = static_cast<int>(component);
    out.push_back(std::move(ex));
  }
  return out;
}

Dataset ComponentMixture::sample(std::size_t count, std::uint64_t seed, int num_classes,
                                 int num_groups, std::string name) const {
  validate_probability_vector(frequencies, "mixture frequencies");
  if (frequencies.size() != components.size()) {
    throw std::invalid_argument("mixture frequencies length does not match component count");
  }
  Dataset ds(std::move(name), dim(), num_classes, num_groups);
  Rng rng(seed);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t i = rng.categorical(frequencies);
    const auto& c = components[i];
    Example ex;
    ex.id = n;
    ex.features.resize(c.mean.size());
    for (std::size_t t = 0; t < c.mean.size(); ++t) ex.features[t] = c.mean[t] + c.sigma * rng.normal();
    ex.label = c.label;
    ex.group = c.group;
    ex.component = static_cast<int>(i);
    ds.add(std::move(ex));
  }
  return ds;
}

MixtureDraw make_synthetic_mixture(const MixtureSpec& spec) {
  if (spec.num_components < 1) throw std::invalid_argument("mixture needs at least one component");
  const auto n_comp = static_cast<std::size_t>(spec.num_components);
  if (spec.frequencies_train.size() != n_comp || spec.frequencies_test.size() != n_comp) {
    throw std::invalid_argument("frequency vectors must have one entry per component");
  }
  validate_probability_vector(spec.frequencies_train, "frequencies_P");
  validate_probability_vector(spec.frequencies_test, "frequencies_Q");
  if (spec.dim == 0) throw std::invalid_argument("mixture dimension must be positive");

  Rng rng(derive_seed(spec.seed, "mixture/means"));
  std::vector<MixtureComponent> comps(n_comp);
  for (std::size_t i = 0; i < n_comp; ++i) {
    comps[i].mean.resize(spec.dim);
    for (double& m : comps[i].mean) m = spec.separation * rng.normal();
    comps[i].sigma = spec.sigma;
    comps[i].label = static_cast<int>(i) % spec.num_classes;
    comps[i].group = (static_cast<int>(i) / spec.num_classes) % spec.num_groups;
  }

  MixtureDraw out;
  out.train_mixture = {comps, spec.frequencies_train};
  out.test_mixture = {comps, spec.frequencies_test};
  out.train = out.train_mixture.sample(spec.train_size, derive_seed(spec.seed, "mixture/train"),
                                       spec.num_classes, spec.num_groups, "mixture/train");
  out.test = out.test_mixture.sample(spec.test_size, derive_seed(spec.seed, "mixture/test"),
                                     spec.num_classes, spec.num_groups, "mixture/test");
  return out;
}

// ---------------------------------------------------------------------------

Dataset sample_group_shift(const GroupShiftSpec& spec, std::size_t count, double group1_fraction,
                           std::uint64_t seed, std::string name, std::size_t first_id) {
  if (spec.dim < 2) throw std::invalid_argument("group-shift fixture needs dim >= 2");
  if (!(group1_fraction >= 0.0 && group1_fraction <= 1.0)) {
    throw std::invalid_argument("group1 fraction must lie in [0, 1]");
  }
  Dataset ds(std::move(name), spec.dim, 2, 2);
  Rng rng(seed);
  for (std::size_t n = 0; n < count; ++n) {
    const int g = rng.uniform() < group1_fraction ? 1 : 0;
    Example ex;
    ex.id = first_id + n;
    ex.features.resize(spec.dim);
    for (double& v : ex.features) v = rng.normal();
    ex.features[0] += g == 0 ? spec.group_signal : -spec.group_signal;
    const double threshold = g == 0 ? 0.0 : -spec.shift;
    if (g == 1) ex.features[1] -= spec.shift;
    int y = ex.features[1] > threshold ? 1 : 0;
    if (rng.uniform() < spec.label_noise) y = 1 - y;
    ex.label = y;
    ex.group = g;
    ds.add(std::move(ex));
  }
  return ds;
}

SplitBundle make_group_shift_bundle(const GroupShiftSpec& spec, std::uint64_t seed) {
  std::size_t next_id = 0;
  auto draw = [&](std::size_t count, double frac, const char* part) {
    Dataset ds = sample_group_shift(spec, count, frac, derive_seed(seed, part),
                                    std::string("group_shift/") + part, next_id);
    next_id += count;
    return ds;
  };
  SplitBundle b;
  b.train = draw(spec.train_size, spec.train_group1_fraction, "train").without_groups();
  b.pool = CandidatePool(draw(spec.pool_size, spec.group1_fraction, "pool"));
  b.validation = draw(spec.validation_size, spec.group1_fraction, "validation");
  b.test = draw(spec.test_size, spec.group1_fraction, "test");
  return b;
}

}  // namespace fis
