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

#include "fis/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fis/rng.hpp"

namespace fis {

std::size_t Mlp::param_count(std::span<const std::size_t> layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  }
  return n;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, std::vector<double> params)
    : layer_sizes_(std::move(layer_sizes)), params_(std::move(params)) {
  if (layer_sizes_.size() < 2) {
    throw std::invalid_argument("model needs at least 2 layer sizes (input and output)");
  }
  for (std::size_t s : layer_sizes_) {
    if (s == 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (layer_sizes_.back() < 2) throw std::invalid_argument("output layer needs at least 2 classes");
  const std::size_t expected = param_count(layer_sizes_);
  if (params_.size() != expected) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(params_.size()) +
                                ", layer sizes require " + std::to_string(expected));
  }
  offsets_.resize(num_layers() + 1);
  offsets_[0] = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    offsets_[l + 1] = offsets_[l] + (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  }
}

std::size_t Mlp::scope_begin(const GradScope& scope) const {
  if (scope.full() || scope.last_layers >= num_layers()) return 0;
  return offsets_[num_layers() - scope.last_layers];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Mlp init_model(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("model needs at least 2 layer sizes (input and output)");
  }
  std::vector<double> params(Mlp::param_count(layer_sizes), 0.0);
  Rng rng(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < in * out; ++i) params[off + i] = rng.uniform(-bound, bound);
    off += (in + 1) * out;  // biases stay zero
  }
  return Mlp(std::move(layer_sizes), std::move(params));
}

namespace {

void softmax_into(std::span<const double> logits, std::vector<double>& probs) {
  probs.resize(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - mx);
    z += probs[k];
  }
  for (double& p : probs) p /= z;
}

void check_input(const Mlp& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) +
                                " features, model expects " + std::to_string(m.input_dim()));
  }
}

void check_label(const Mlp& m, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= m.num_classes()) {
    throw std::invalid_argument("label " + std::to_string(label) + " out of range");
  }
}

}  // namespace

ForwardTrace trace_forward(const Mlp& m, std::span<const double> x) {
  check_input(m, x);
  const auto& sizes = m.layer_sizes();
  const auto p = m.params();
  ForwardTrace t;
  t.activations.resize(m.num_layers() + 1);
  t.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double* w = p.data() + m.layer_offset(l);
    const double* b = w + in * out;
    const auto& a = t.activations[l];
    auto& z = t.activations[l + 1];
    z.resize(out);
    const bool hidden = l + 1 < m.num_layers();
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = hidden ? std::max(s, 0.0) : s;
    }
  }
  softmax_into(t.activations.back(), t.probs);
  return t;
}

void accumulate_backward(const Mlp& m, const ForwardTrace& t, std::span<const double> upstream,
                         double scale, std::span<double> grad, const GradScope& scope) {
  if (grad.size() != m.num_params()) throw std::invalid_argument("gradient buffer size mismatch");
  if (upstream.size() != m.num_classes()) throw std::invalid_argument("upstream size mismatch");
  const auto& sizes = m.layer_sizes();
  const auto p = m.params();
  const std::size_t first_layer =
      scope.full() ? 0 : m.num_layers() - std::min(scope.last_layers, m.num_layers());

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (double& v : delta) v *= scale;
  std::vector<double> prev;
  for (std::size_t l = m.num_layers(); l-- > first_layer;) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const std::size_t off = m.layer_offset(l);
    const auto& a = t.activations[l];
    double* gw = grad.data() + off;
    double* gb = gw + in * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += d * a[i];
      gb[o] += d;
    }
    if (l == first_layer) break;
    // Propagate through the weights and the ReLU of layer l's input.
    const double* w = p.data() + off;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < in; ++i) {
      if (a[i] <= 0.0) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
}

std::vector<double> forward(const Mlp& m, std::span<const double> x) {
  return trace_forward(m, x).probs;
}

int argmax_lowest(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return static_cast<int>(best);
}

int predict(const Mlp& m, std::span<const double> x) {
  // Compare logits rather than rounded probabilities so ties are exact.
  const auto t = trace_forward(m, x);
  return argmax_lowest(t.activations.back());
}

double example_loss(const Mlp& m, std::span<const double> x, int label) {
  check_label(m, label);
  const auto t = trace_forward(m, x);
  const auto& z = t.activations.back();
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[static_cast<std::size_t>(label)];
}

double example_loss(const Mlp& m, const Example& z) {
  if (!z.label) throw std::invalid_argument("example_loss: example " + std::to_string(z.id) +
                                            " has no label");
  return example_loss(m, z.features, *z.label);
}

GradientVector grad_example_loss(const Mlp& m, std::span<const double> x, int label,
                                 const GradScope& scope) {
  check_label(m, label);
  const auto t = trace_forward(m, x);
  std::vector<double> upstream = t.probs;
  upstream[static_cast<std::size_t>(label)] -= 1.0;
  GradientVector g{std::vector<double>(m.num_params(), 0.0), scope};
  accumulate_backward(m, t, upstream, 1.0, g.values, scope);
  return g;
}

GradientVector grad_example_loss(const Mlp& m, const Example& z, const GradScope& scope) {
  if (!z.label) {
    throw std::invalid_argument("grad_example_loss: example " + std::to_string(z.id) +
                                " has no label");
  }
  return grad_example_loss(m, z.features, *z.label, scope);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and nonnegative");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(new_data_weight >= 1.0)) throw std::invalid_argument("new_data_weight must be >= 1");
}

std::vector<TrainItem> train_items(const Dataset& ds, double weight) {
  std::vector<TrainItem> items;
  items.reserve(ds.size());
  for (const auto& e : ds.examples()) {
    if (!e.label) throw std::invalid_argument("training requires labeled examples");
    items.push_back({e.features, *e.label, weight});
  }
  return items;
}

TrainResult sgd_train(const Mlp& m, std::span<const TrainItem> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("sgd_train: empty training data");
  for (const auto& it : data) {
    check_input(m, it.features);
    check_label(m, it.label);
    if (!(it.weight > 0.0)) throw std::invalid_argument("training weights must be positive");
  }

  TrainResult res{m, {}};
  Mlp& model = res.model;
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool full_batch = cfg.batch_size >= n;
  Rng rng(cfg.seed);
  std::vector<double> grad(model.num_params());
  std::vector<double> carry(model.num_params());
  std::vector<double> example_grad(model.num_params());
  std::vector<double> upstream(model.num_classes());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!full_batch) rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      std::fill(carry.begin(), carry.end(), 0.0);
      double batch_weight = 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        const auto& it = data[order[j]];
        const auto t = trace_forward(model, it.features);
        const auto& z = t.activations.back();
        const double mx = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - mx);
        epoch_loss += it.weight * (mx + std::log(s) - z[static_cast<std::size_t>(it.label)]);
        upstream = t.probs;
        upstream[static_cast<std::size_t>(it.label)] -= 1.0;
        std::fill(example_grad.begin(), example_grad.end(), 0.0);
        accumulate_backward(model, t, upstream, it.weight, example_grad);
        // Two-sum accumulation: the batch gradient does not depend on example order.
        for (std::size_t i = 0; i < grad.size(); ++i) {
          const double x = example_grad[i];
          const double sum = grad[i] + x;
          const double bp = sum - grad[i];
          carry[i] += (grad[i] - (sum - bp)) + (x - bp);
          grad[i] = sum;
        }
        batch_weight += it.weight;
      }
      epoch_weight += batch_weight;
      const double step = cfg.learning_rate / batch_weight;
      auto params = model.mutable_params();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step * (grad[i] + carry[i]);
      model.set_step(model.step() + 1);
    }
    res.loss_history.push_back(epoch_loss / epoch_weight);
  }
  return res;
}

Evaluation evaluate(const Mlp& m, const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& e : ds.examples()) {
    if (!e.label) throw std::invalid_argument("evaluate: dataset has unlabeled examples");
    const auto t = trace_forward(m, e.features);
    const auto& z = t.activations.back();
    if (argmax_lowest(z) == *e.label) ++correct;
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    loss += mx + std::log(s) - z[static_cast<std::size_t>(*e.label)];
  }
  const double n = static_cast<double>(ds.size());
  return {static_cast<double>(correct) / n, loss / n};
}

std::vector<int> predict_all(const Mlp& m, const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& e : ds.examples()) out.push_back(predict(m, e.features));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("failed to format parameter");
  return std::string(buf, ptr);
}

}  // namespace

std::string checkpoint_to_string(const Mlp& m) {
  std::string out = "fis-checkpoint 1\nlayers";
  for (std::size_t s : m.layer_sizes()) out += " " + std::to_string(s);
  out += "\nstep " + std::to_string(m.step());
  out += "\nparams " + std::to_string(m.num_params()) + "\n";
  for (double v : m.params()) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

Mlp checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fail = [](const std::string& what) -> Mlp {
    throw std::invalid_argument("malformed checkpoint: " + what);
  };
  if (!std::getline(in, line) || line != "fis-checkpoint 1") return fail("bad magic line");

  std::vector<std::size_t> sizes;
  if (!std::getline(in, line) || line.rfind("layers", 0) != 0) return fail("missing layers line");
  {
    std::istringstream ls(line.substr(6));
    std::size_t s;
    while (ls >> s) sizes.push_back(s);
  }
  std::uint64_t step = 0;
  if (!std::getline(in, line) || line.rfind("step ", 0) != 0) return fail("missing step line");
  step = std::stoull(line.substr(5));
  if (!std::getline(in, line) || line.rfind("params ", 0) != 0) return fail("missing params line");
  const std::size_t count = std::stoull(line.substr(7));

  std::vector<double> params;
  params.reserve(count);
  while (params.size() < count && std::getline(in, line)) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) return fail("bad value '" + line + "'");
    params.push_back(v);
  }
  if (params.size() != count) return fail("truncated parameter list");
  Mlp m(std::move(sizes), std::move(params));
  m.set_step(step);
  return m;
}

void save_checkpoint(const Mlp& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(m);
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace fis
