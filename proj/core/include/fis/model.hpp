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
#include <span>
#include <string>
#include <vector>

#include "fis/data.hpp"

namespace fis {

/// Which parameters a gradient covers. `last_layers == 0` means every layer;
/// otherwise only the final `last_layers` affine layers, with the remaining
/// entries zero-filled so vectors stay aligned with the full parameter list.
struct GradScope {
  std::size_t last_layers = 0;

  bool full() const { return last_layers == 0; }
  friend bool operator==(const GradScope&, const GradScope&) = default;
};

/// Feed-forward classifier: affine layers with ReLU between them and a
/// softmax head. Parameters are stored flat, layer by layer, each layer as a
/// row-major (out x in) weight block followed by its `out` biases.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, std::vector<double> params);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t num_layers() const { return layer_sizes_.size() - 1; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t num_classes() const { return layer_sizes_.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  /// Offset of layer `l`'s weight block in the flat parameter vector.
  std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }
  /// First parameter index covered by `scope`.
  std::size_t scope_begin(const GradScope& scope) const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  static std::size_t param_count(std::span<const std::size_t> layer_sizes);

 private:
  std::vector<std::size_t> layer_sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::uint64_t step_ = 0;
};

struct GradientVector {
  std::vector<double> values;
  GradScope scope;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
Mlp init_model(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

/// Activations of every layer for one input; `probs` is the softmax output.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // [0] = input, back() = logits
  std::vector<double> probs;
};

ForwardTrace trace_forward(const Mlp& m, std::span<const double> x);

/// Accumulates `scale * d(sum_j upstream_j * logit_j)/d(params)` into `grad`,
/// visiting only the layers covered by `scope`.
void accumulate_backward(const Mlp& m, const ForwardTrace& t, std::span<const double> upstream,
                         double scale, std::span<double> grad, const GradScope& scope = {});

std::vector<double> forward(const Mlp& m, std::span<const double> x);

/// Argmax of the forward output; ties go to the lowest class index.
int predict(const Mlp& m, std::span<const double> x);
int argmax_lowest(std::span<const double> v);

/// Cross-entropy of the true class, computed from logits.
double example_loss(const Mlp& m, std::span<const double> x, int label);
double example_loss(const Mlp& m, const Example& z);

GradientVector grad_example_loss(const Mlp& m, std::span<const double> x, int label,
                                 const GradScope& scope = {});
GradientVector grad_example_loss(const Mlp& m, const Example& z, const GradScope& scope = {});

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Loss multiplier applied to examples acquired from the pool.
  double new_data_weight = 2.0;
  GradScope grad_scope;

  void validate() const;
};

struct TrainItem {
  std::span<const double> features;
  int label = 0;
  double weight = 1.0;
};

/// Items view over a labeled dataset. The dataset must outlive the items.
std::vector<TrainItem> train_items(const Dataset& ds, double weight = 1.0);

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // weight-averaged loss seen during each epoch
};

/// Mini-batch SGD on the weight-normalized batch loss
///   sum_i w_i l(x_i, y_i) / sum_i w_i.
/// Batches are reshuffled each epoch unless one batch covers all data.
TrainResult sgd_train(const Mlp& m, std::span<const TrainItem> data, const TrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

Evaluation evaluate(const Mlp& m, const Dataset& ds);
std::vector<int> predict_all(const Mlp& m, const Dataset& ds);

/// Plain-text checkpoint: header lines, then one parameter per line printed
/// with 17 significant digits.
std::string checkpoint_to_string(const Mlp& m);
Mlp checkpoint_from_string(const std::string& text);
void save_checkpoint(const Mlp& m, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace fis
