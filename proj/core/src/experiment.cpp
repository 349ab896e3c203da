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

#include "fis/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fis/parallel.hpp"
#include "fis/rng.hpp"
#include "serialize.hpp"

namespace fis {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::RunErm: return "run-erm";
    case Command::RunFis: return "run-fis";
    case Command::RunBaseline: return "run-baseline";
    case Command::VerifyInfluence: return "verify-influence";
    case Command::VerifyBounds: return "verify-bounds";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::RunErm, Command::RunFis, Command::RunBaseline, Command::VerifyInfluence,
                    Command::VerifyBounds}) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown command '" + std::string(name) + "'");
}

namespace {

namespace fs = std::filesystem;

/// Prefixes any error raised inside `fn` with the config field or stage.
template <typename Fn>
auto within(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw std::invalid_argument(where + ": " + e.what());
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0) throw;
    throw std::invalid_argument(where + ": " + msg);
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& block) {
  if (!j.is_object()) throw std::invalid_argument(block + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument("unknown field '" + (block.empty() ? key : block + "." + key) + "'");
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

fs::path resolve_existing(const fs::path& p, const fs::path& base, const std::string& field) {
  const fs::path full = p.is_absolute() ? p : base / p;
  if (!fs::exists(full)) throw std::invalid_argument(field + ": file not found: " + full.string());
  return fs::weakly_canonical(full);
}

CsvSource parse_csv_source(const json& j, const fs::path& base) {
  reject_unknown(j, {"path", "schema", "fractions", "balance", "standardize"}, "dataset.csv");
  CsvSource s;
  if (!j.contains("path")) throw std::invalid_argument("dataset.csv.path: missing");
  s.path = resolve_existing(j.at("path").get<std::string>(), base, "dataset.csv.path");
  if (!j.contains("schema")) throw std::invalid_argument("dataset.csv.schema: missing");
  const json& sc = j.at("schema");
  within("dataset.csv.schema", [&] {
    reject_unknown(sc, {"features", "label", "group", "num_classes", "num_groups"}, "dataset.csv.schema");
    s.schema.features = sc.at("features").get<std::vector<std::string>>();
    if (sc.contains("label")) s.schema.label = sc.at("label").get<std::string>();
    if (sc.contains("group")) s.schema.group = sc.at("group").get<std::string>();
    if (sc.contains("num_classes")) s.schema.num_classes = sc.at("num_classes").get<int>();
    if (sc.contains("num_groups")) s.schema.num_groups = sc.at("num_groups").get<int>();
  });
  if (!s.schema.label || !s.schema.group) {
    throw std::invalid_argument("dataset.csv.schema: label and group columns are required");
  }
  if (j.contains("fractions")) {
    within("dataset.csv.fractions", [&] {
      const json& f = j.at("fractions");
      reject_unknown(f, {"train", "pool", "validation", "test"}, "dataset.csv.fractions");
      read_if(f, "train", s.fractions.train);
      read_if(f, "pool", s.fractions.pool);
      read_if(f, "validation", s.fractions.validation);
      read_if(f, "test", s.fractions.test);
      const double sum = s.fractions.train + s.fractions.pool + s.fractions.validation + s.fractions.test;
      if (std::abs(sum - 1.0) > 1e-9 || s.fractions.train < 0 || s.fractions.pool < 0 ||
          s.fractions.validation < 0 || s.fractions.test < 0) {
        throw std::invalid_argument("fractions must be nonnegative and sum to 1");
      }
    });
  }
  read_if(j, "balance", s.balance);
  read_if(j, "standardize", s.standardize);
  return s;
}

GroupShiftSource parse_group_shift(const json& j) {
  reject_unknown(j, {"dim", "train_size", "pool_size", "validation_size", "test_size",
                     "train_group1_fraction", "group1_fraction", "shift", "group_signal",
                     "label_noise"}, "dataset.group_shift");
  GroupShiftSource s;
  auto& g = s.spec;
  read_if(j, "dim", g.dim);
  read_if(j, "train_size", g.train_size);
  read_if(j, "pool_size", g.pool_size);
  read_if(j, "validation_size", g.validation_size);
  read_if(j, "test_size", g.test_size);
  read_if(j, "train_group1_fraction", g.train_group1_fraction);
  read_if(j, "group1_fraction", g.group1_fraction);
  read_if(j, "shift", g.shift);
  read_if(j, "group_signal", g.group_signal);
  read_if(j, "label_noise", g.label_noise);
  if (g.dim < 2) throw std::invalid_argument("dataset.group_shift.dim: must be at least 2");
  if (g.train_size == 0) throw std::invalid_argument("dataset.group_shift.train_size: must be positive");
  return s;
}

MixtureSource parse_mixture(const json& j) {
  reject_unknown(j, {"num_components", "dim", "num_classes", "num_groups", "frequencies_train",
                     "frequencies_test", "train_size", "test_size", "separation", "sigma"},
                 "dataset.mixture");
  MixtureSource s;
  auto& m = s.spec;
  read_if(j, "num_components", m.num_components);
  read_if(j, "dim", m.dim);
  read_if(j, "num_classes", m.num_classes);
  read_if(j, "num_groups", m.num_groups);
  read_if(j, "train_size", m.train_size);
  read_if(j, "test_size", m.test_size);
  read_if(j, "separation", m.separation);
  read_if(j, "sigma", m.sigma);
  for (const char* key : {"frequencies_train", "frequencies_test"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("dataset.mixture.") + key + ": missing");
  }
  m.frequencies_train = j.at("frequencies_train").get<std::vector<double>>();
  m.frequencies_test = j.at("frequencies_test").get<std::vector<double>>();
  const auto n = static_cast<std::size_t>(std::max(m.num_components, 0));
  within("dataset.mixture.frequencies_train", [&] {
    if (m.frequencies_train.size() != n) throw std::invalid_argument("needs one entry per component");
    validate_probability_vector(m.frequencies_train, "frequencies_train");
  });
  within("dataset.mixture.frequencies_test", [&] {
    if (m.frequencies_test.size() != n) throw std::invalid_argument("needs one entry per component");
    validate_probability_vector(m.frequencies_test, "frequencies_test");
  });
  return s;
}

json dataset_to_json(const DatasetSource& src) {
  json out;
  if (const auto* c = std::get_if<CsvSource>(&src)) {
    json j;
    j["path"] = c->path.string();
    json sc;
    sc["features"] = c->schema.features;
    sc["label"] = *c->schema.label;
    sc["group"] = *c->schema.group;
    if (c->schema.num_classes) sc["num_classes"] = *c->schema.num_classes;
    if (c->schema.num_groups) sc["num_groups"] = *c->schema.num_groups;
    j["schema"] = sc;
    j["fractions"] = {{"train", c->fractions.train},
                      {"pool", c->fractions.pool},
                      {"validation", c->fractions.validation},
                      {"test", c->fractions.test}};
    j["balance"] = c->balance;
    j["standardize"] = c->standardize;
    out["csv"] = j;
  } else if (const auto* g = std::get_if<GroupShiftSource>(&src)) {
    const auto& s = g->spec;
    out["group_shift"] = {{"dim", s.dim},
                          {"train_size", s.train_size},
                          {"pool_size", s.pool_size},
                          {"validation_size", s.validation_size},
                          {"test_size", s.test_size},
                          {"train_group1_fraction", s.train_group1_fraction},
                          {"group1_fraction", s.group1_fraction},
                          {"shift", s.shift},
                          {"group_signal", s.group_signal},
                          {"label_noise", s.label_noise}};
  } else {
    const auto& s = std::get<MixtureSource>(src).spec;
    out["mixture"] = {{"num_components", s.num_components},
                      {"dim", s.dim},
                      {"num_classes", s.num_classes},
                      {"num_groups", s.num_groups},
                      {"frequencies_train", s.frequencies_train},
                      {"frequencies_test", s.frequencies_test},
                      {"train_size", s.train_size},
                      {"test_size", s.test_size},
                      {"separation", s.separation},
                      {"sigma", s.sigma}};
  }
  return out;
}

json config_to_json(const ExperimentConfig& cfg, bool with_location) {
  json j;
  if (cfg.command) j["command"] = std::string(to_string(*cfg.command));
  j["seed"] = cfg.seed;
  if (with_location) {
    j["output_dir"] = cfg.output_dir.string();
    j["threads"] = cfg.threads;
  }
  j["dataset"] = dataset_to_json(cfg.dataset);
  j["train"] = to_json(cfg.fis.train);
  j["fis"] = to_json(cfg.fis);
  j["baseline"] = {{"kind", std::string(to_string(cfg.baseline))}};
  json infl;
  infl["checkpoint"] = cfg.influence.checkpoint ? json(cfg.influence.checkpoint->string()) : json(nullptr);
  infl["num_candidates"] = cfg.influence.num_candidates;
  infl["eta"] = cfg.influence.eta;
  infl["scale_factor"] = cfg.influence.scale_factor;
  j["influence"] = infl;
  json b = to_json(cfg.bounds.bound);
  b["trials"] = cfg.bounds.trials;
  b["group"] = cfg.bounds.group;
  b["sweep_test_frequencies"] = cfg.bounds.sweep_test_frequencies;
  j["bounds"] = b;
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(j, {"command", "seed", "output_dir", "threads", "dataset", "train", "fis", "baseline",
                     "influence", "bounds"}, "");
  ExperimentConfig cfg;
  if (j.contains("command")) {
    cfg.command = within("command", [&] { return parse_command(j.at("command").get<std::string>()); });
  }
  within("seed", [&] { read_if(j, "seed", cfg.seed); });
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (cfg.output_dir.is_relative()) cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
  within("threads", [&] { read_if(j, "threads", cfg.threads); });
  if (cfg.threads < 1) throw std::invalid_argument("threads: must be at least 1");

  if (!j.contains("dataset")) throw std::invalid_argument("dataset: missing");
  const json& ds = j.at("dataset");
  if (!ds.is_object() || ds.size() != 1) {
    throw std::invalid_argument("dataset: exactly one source (csv, group_shift or mixture) is required");
  }
  if (ds.contains("csv")) {
    cfg.dataset = parse_csv_source(ds.at("csv"), base_dir);
  } else if (ds.contains("group_shift")) {
    cfg.dataset = within("dataset.group_shift", [&] { return parse_group_shift(ds.at("group_shift")); });
  } else if (ds.contains("mixture")) {
    cfg.dataset = within("dataset.mixture", [&] { return parse_mixture(ds.at("mixture")); });
  } else {
    throw std::invalid_argument("dataset: unknown source '" + ds.begin().key() + "'");
  }

  if (j.contains("train")) {
    cfg.fis.train = within("train", [&] { return train_config_from_json(j.at("train"), cfg.fis.train); });
  }
  if (j.contains("fis")) {
    cfg.fis = within("fis", [&] { return fis_config_from_json(j.at("fis"), cfg.fis); });
  }
  within("fis", [&] { cfg.fis.validate(); });

  if (j.contains("baseline")) {
    within("baseline", [&] {
      const json& b = j.at("baseline");
      reject_unknown(b, {"kind"}, "baseline");
      if (b.contains("kind")) cfg.baseline = parse_baseline_kind(b.at("kind").get<std::string>());
    });
  }

  if (j.contains("influence")) {
    const json& in = j.at("influence");
    reject_unknown(in, {"checkpoint", "num_candidates", "eta", "scale_factor"}, "influence");
    if (in.contains("checkpoint") && !in.at("checkpoint").is_null()) {
      cfg.influence.checkpoint = resolve_existing(in.at("checkpoint").get<std::string>(), base_dir,
                                                  "influence.checkpoint");
    }
    within("influence.num_candidates", [&] { read_if(in, "num_candidates", cfg.influence.num_candidates); });
    within("influence.eta", [&] { read_if(in, "eta", cfg.influence.eta); });
    within("influence.scale_factor", [&] { read_if(in, "scale_factor", cfg.influence.scale_factor); });
    if (!(cfg.influence.eta >= 0.0)) throw std::invalid_argument("influence.eta: must be nonnegative");
    if (!(cfg.influence.scale_factor > 1.0)) {
      throw std::invalid_argument("influence.scale_factor: must exceed 1");
    }
    if (cfg.influence.num_candidates == 0) {
      throw std::invalid_argument("influence.num_candidates: must be positive");
    }
  }

  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    cfg.bounds.bound = within("bounds", [&] { return bound_config_from_json(b, cfg.bounds.bound); });
    within("bounds.trials", [&] { read_if(b, "trials", cfg.bounds.trials); });
    within("bounds.group", [&] { read_if(b, "group", cfg.bounds.group); });
    within("bounds.sweep_test_frequencies",
           [&] { read_if(b, "sweep_test_frequencies", cfg.bounds.sweep_test_frequencies); });
  }
  within("bounds", [&] { cfg.bounds.bound.validate(); });
  if (cfg.bounds.trials == 0) throw std::invalid_argument("bounds.trials: must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), fs::absolute(path).parent_path());
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
  return config_to_json(cfg, true).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(dump_line(config_to_json(cfg, false)));
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage) {
  return derive_seed(cfg.seed, stage);
}

SplitBundle build_bundle(const ExperimentConfig& cfg) {
  if (const auto* c = std::get_if<CsvSource>(&cfg.dataset)) {
    Dataset ds = load_csv(c->path, c->schema);
    if (c->balance) {
      Dataset balanced = balance_oversample(ds, stage_seed(cfg, "balance"));
      // Oversampled copies become distinct records.
      Dataset relabeled(balanced.name(), balanced.dim(), balanced.num_classes(), balanced.num_groups());
      std::size_t id = 0;
      for (Example e : balanced.examples()) {
        e.id = id++;
        relabeled.add(std::move(e));
      }
      ds = std::move(relabeled);
    }
    SplitBundle b = split(ds, c->fractions, stage_seed(cfg, "split"));
    return c->standardize ? standardize(std::move(b)) : b;
  }
  if (const auto* g = std::get_if<GroupShiftSource>(&cfg.dataset)) {
    return make_group_shift_bundle(g->spec, stage_seed(cfg, "data"));
  }
  throw std::invalid_argument("dataset: a mixture source only drives verify-bounds; use csv or group_shift");
}

// ---------------------------------------------------------------------------

namespace {

struct RunContext {
  const ExperimentConfig& cfg;
  fs::path out_dir;
  std::string hash;
  std::ofstream log;
  std::ostream& console;

  void note(const std::string& line) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << line << "\n";
    log.flush();
    console << line << "\n";
  }

  json stamp(json j) const {
    json out;
    out["type"] = j.value("type", "record");
    out["seed"] = cfg.seed;
    out["config_hash"] = hash;
    for (auto& [k, v] : j.items()) {
      if (k != "type") out[k] = v;
    }
    return out;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json report_pair(const RoundRecord& r) {
  json j;
  j["round"] = r.round;
  j["accuracy"] = r.test.accuracy;
  j["dp_gap"] = r.test.dp_gap ? json(*r.test.dp_gap) : json(nullptr);
  j["eop_gap"] = r.test.eop_gap ? json(*r.test.eop_gap) : json(nullptr);
  j["eod_gap"] = r.test.eod_gap ? json(*r.test.eod_gap) : json(nullptr);
  j["val_accuracy"] = r.val_accuracy;
  return j;
}

void run_acquisition(RunContext& ctx, Command cmd) {
  const auto& cfg = ctx.cfg;
  const SplitBundle bundle = within("stage 'dataset'", [&] { return build_bundle(cfg); });
  ctx.note("dataset: train=" + std::to_string(bundle.train.size()) + " pool=" +
           std::to_string(bundle.pool.size()) + " validation=" + std::to_string(bundle.validation.size()) +
           " test=" + std::to_string(bundle.test.size()));

  FisConfig fc = cfg.fis;
  fc.seed = stage_seed(cfg, "run");
  fc.threads = cfg.threads;
  const RunResult res = within("stage 'training'", [&] {
    switch (cmd) {
      case Command::RunFis: return fis_run(bundle, fc);
      case Command::RunErm: return baseline_run(bundle, BaselineKind::ERM, fc);
      default: return baseline_run(bundle, cfg.baseline, fc);
    }
  });

  const fs::path ckpt_dir = ctx.out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  std::string records;
  for (std::size_t i = 0; i < res.rounds.size(); ++i) {
    const auto& r = res.rounds[i];
    save_checkpoint(res.checkpoints[i], ckpt_dir / (r.checkpoint_id + ".txt"));
    json rec = to_json(r);
    rec["type"] = "round";
    rec["strategy"] = res.strategy;
    records += dump_line(ctx.stamp(rec)) + "\n";
    ctx.note(res.strategy + " round " + std::to_string(r.round) + ": val_acc=" +
             std::to_string(r.val_accuracy) + " test_acc=" + std::to_string(r.test.accuracy) +
             " selected=" + std::to_string(r.selected.size()));
  }

  json summary;
  summary["type"] = "summary";
  summary["strategy"] = res.strategy;
  summary["metric"] = std::string(to_string(fc.metric));
  summary["rounds"] = res.rounds.size() - 1;
  summary["warm_start"] = report_pair(res.warm_start());
  summary["final"] = report_pair(res.final_record());
  summary["final_round"] = res.final_round;
  summary["output_rounds"] = res.output_rounds;
  json out_ckpts = json::array();
  for (std::size_t t : res.output_rounds) out_ckpts.push_back(res.rounds[t].checkpoint_id);
  summary["output_checkpoints"] = out_ckpts;
  summary["budget_consumed"] = res.rounds.back().budget_consumed;
  summary["new_data_weight"] = fc.train.new_data_weight;
  summary["influence_eta"] = fc.scoring_eta();
  const json stamped = ctx.stamp(summary);
  records += dump_line(stamped) + "\n";
  write_text(ctx.out_dir / "records.jsonl", records);
  write_text(ctx.out_dir / "summary.json", stamped.dump(2) + "\n");

  if (fc.keep_all_scores) {
    std::string dump;
    for (std::size_t t = 0; t < res.all_scores.size(); ++t) {
      for (const auto& s : res.all_scores[t]) {
        json j = to_json(s);
        j["round"] = t;
        dump += dump_line(j) + "\n";
      }
    }
    write_text(ctx.out_dir / "influence.jsonl", dump);
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_verify_influence(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const SplitBundle bundle = within("stage 'dataset'", [&] { return build_bundle(cfg); });
  FisConfig fc = cfg.fis;
  fc.seed = stage_seed(cfg, "run");
  const Mlp model = within("stage 'model'", [&] {
    if (cfg.influence.checkpoint) {
      Mlp m = load_checkpoint(*cfg.influence.checkpoint);
      if (m.input_dim() != bundle.train.dim() ||
          m.num_classes() != static_cast<std::size_t>(bundle.train.num_classes())) {
        throw std::invalid_argument("checkpoint shape does not match the dataset");
      }
      return m;
    }
    return baseline_run(bundle, BaselineKind::ERM, fc).checkpoints.front();
  });
  if (bundle.pool.empty()) throw std::invalid_argument("stage 'influence': candidate pool is empty");

  const double eta = cfg.influence.eta;
  const double eta_small = eta / cfg.influence.scale_factor;
  const InfluenceScorer scorer(model, bundle.validation, fc.metric, eta, fc.train.grad_scope);

  std::vector<std::size_t> ids(bundle.pool.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  Rng rng(stage_seed(cfg, "influence/candidates"));
  const std::size_t n = std::min(cfg.influence.num_candidates, ids.size());
  for (std::size_t j = 0; j < n; ++j) std::swap(ids[j], ids[j + rng.below(ids.size() - j)]);
  ids.resize(n);

  struct Pair {
    std::size_t id;
    int label;
    OracleResult at_eta;
    OracleResult at_small;
  };
  std::vector<Pair> pairs(n);
  within("stage 'influence'", [&] {
    parallel_for(n, cfg.threads, [&](std::size_t j) {
      const auto x = bundle.pool.features(ids[j]);
      const int y = scorer.score(ids[j], x, fc.label_strategy).guessed_label;
      pairs[j] = {ids[j], y,
                  exact_one_step_oracle(model, x, y, bundle.validation, eta, fc.metric, fc.train.grad_scope),
                  exact_one_step_oracle(model, x, y, bundle.validation, eta_small, fc.metric,
                                        fc.train.grad_scope)};
    });
    return 0;
  });

  std::string records;
  std::vector<double> rel;
  std::size_t scaling_ok = 0;
  for (const auto& p : pairs) {
    const double err = std::abs(p.at_eta.delta_loss_exact - p.at_eta.first_order_loss);
    const double err_small = std::abs(p.at_small.delta_loss_exact - p.at_small.first_order_loss);
    const double r = err / (std::abs(p.at_eta.delta_loss_exact) + 1e-8);
    const bool ok = err_small <= err / 5.0;
    rel.push_back(r);
    scaling_ok += ok ? 1 : 0;
    json j;
    j["type"] = "influence_pair";
    j["candidate_id"] = p.id;
    j["label"] = p.label;
    j["eta"] = eta;
    j["exact"] = p.at_eta.delta_loss_exact;
    j["first_order"] = p.at_eta.first_order_loss;
    j["relative_error"] = r;
    j["exact_fair"] = p.at_eta.delta_fair_exact;
    j["first_order_fair"] = p.at_eta.first_order_fair;
    j["eta_small"] = eta_small;
    j["exact_small"] = p.at_small.delta_loss_exact;
    j["first_order_small"] = p.at_small.first_order_loss;
    j["error"] = err;
    j["error_small"] = err_small;
    j["scaling_ok"] = ok;
    records += dump_line(ctx.stamp(j)) + "\n";
  }
  json summary;
  summary["type"] = "summary";
  summary["candidates"] = n;
  summary["eta"] = eta;
  summary["eta_small"] = eta_small;
  summary["median_relative_error"] = median(rel);
  summary["scaling_ok_fraction"] = n == 0 ? 0.0 : static_cast<double>(scaling_ok) / static_cast<double>(n);
  summary["metric"] = std::string(to_string(fc.metric));
  const json stamped = ctx.stamp(summary);
  records += dump_line(stamped) + "\n";
  write_text(ctx.out_dir / "records.jsonl", records);
  write_text(ctx.out_dir / "summary.json", stamped.dump(2) + "\n");
  ctx.note("verify-influence: median relative error " + std::to_string(median(rel)) + " over " +
           std::to_string(n) + " candidates; scaling ok for " + std::to_string(scaling_ok));
}

std::vector<double> trial_test_frequencies(const BoundSweepConfig& b, const MixtureSpec& spec,
                                           std::size_t trial, std::uint64_t seed) {
  std::vector<double> q = spec.frequencies_test;
  if (!b.sweep_test_frequencies) return q;
  const double alpha = b.trials > 1 ? static_cast<double>(trial) / static_cast<double>(b.trials - 1) : 0.0;
  Rng rng(derive_seed(seed, "frequencies"));
  std::vector<double> r(q.size());
  double total = 0.0;
  for (double& v : r) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    v = -std::log(u);
    total += v;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = (1.0 - alpha) * q[i] + alpha * r[i] / total;
    sum += q[i];
  }
  for (double& v : q) v /= sum;
  return q;
}

void run_verify_bounds(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto* src = std::get_if<MixtureSource>(&cfg.dataset);
  if (!src) throw std::invalid_argument("dataset.mixture: verify-bounds requires a synthetic mixture spec");
  const std::size_t trials = cfg.bounds.trials;
  std::vector<json> lines(trials);
  std::vector<int> gen_ok(trials, 0);
  std::vector<int> disp_ok(trials, 0);
  within("stage 'bounds'", [&] {
    parallel_for(trials, cfg.threads, [&](std::size_t t) {
      const std::uint64_t seed = derive_seed(stage_seed(cfg, "bounds"), static_cast<std::uint64_t>(t));
      MixtureSpec spec = src->spec;
      spec.seed = seed;
      spec.frequencies_test = trial_test_frequencies(cfg.bounds, src->spec, t, seed);
      const MixtureDraw draw = make_synthetic_mixture(spec);
      BoundConfig bc = cfg.bounds.bound;
      bc.seed = seed;
      const BoundPair pair = check_bounds(draw, cfg.bounds.group, bc);
      json j;
      j["type"] = "bound_trial";
      j["trial"] = t;
      j["trial_seed"] = seed;
      j["group"] = cfg.bounds.group;
      j["frequencies_train"] = spec.frequencies_train;
      j["frequencies_test"] = spec.frequencies_test;
      j["generalization"] = to_json(pair.generalization);
      j["disparity"] = to_json(pair.disparity);
      lines[t] = std::move(j);
      gen_ok[t] = pair.generalization.slack >= 0.0;
      disp_ok[t] = pair.disparity.slack >= 0.0;
    });
    return 0;
  });
  std::string records;
  for (const auto& j : lines) records += dump_line(ctx.stamp(j)) + "\n";
  int g = 0;
  int d = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    g += gen_ok[t];
    d += disp_ok[t];
  }
  json summary;
  summary["type"] = "summary";
  summary["trials"] = trials;
  summary["generalization_nonnegative"] = g;
  summary["disparity_nonnegative"] = d;
  const json stamped = ctx.stamp(summary);
  write_text(ctx.out_dir / "records.jsonl", records);
  write_text(ctx.out_dir / "summary.json", stamped.dump(2) + "\n");
  ctx.note("verify-bounds: generalization slack >= 0 in " + std::to_string(g) + "/" +
           std::to_string(trials) + " trials; disparity slack >= 0 in " + std::to_string(d) + "/" +
           std::to_string(trials) + " trials");
}

}  // namespace

int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(opts.config);
    if (cfg.command && *cfg.command != opts.command) {
      throw std::invalid_argument("command: config is for '" + std::string(to_string(*cfg.command)) +
                                  "', invoked as '" + std::string(to_string(opts.command)) + "'");
    }
    cfg.command = opts.command;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out) cfg.output_dir = fs::absolute(*opts.out);
    if (opts.threads) {
      if (*opts.threads < 1) throw std::invalid_argument("--threads: must be at least 1");
      cfg.threads = *opts.threads;
    }
    if (opts.command == Command::VerifyBounds && !std::holds_alternative<MixtureSource>(cfg.dataset)) {
      throw std::invalid_argument("dataset.mixture: verify-bounds requires a synthetic mixture spec");
    }
    if (opts.command != Command::VerifyBounds && std::holds_alternative<MixtureSource>(cfg.dataset)) {
      throw std::invalid_argument("dataset: " + std::string(to_string(opts.command)) +
                                  " needs a csv or group_shift source");
    }
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    fs::create_directories(cfg.output_dir);
    RunContext ctx{cfg, cfg.output_dir, config_hash(cfg), std::ofstream(cfg.output_dir / "run.log"), out};
    write_text(cfg.output_dir / "config.resolved", resolved_config_text(cfg));
    ctx.note(std::string(to_string(opts.command)) + " seed=" + std::to_string(cfg.seed) +
             " config_hash=" + ctx.hash);
    switch (opts.command) {
      case Command::RunErm:
      case Command::RunFis:
      case Command::RunBaseline: run_acquisition(ctx, opts.command); break;
      case Command::VerifyInfluence: run_verify_influence(ctx); break;
      case Command::VerifyBounds: run_verify_bounds(ctx); break;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fis
