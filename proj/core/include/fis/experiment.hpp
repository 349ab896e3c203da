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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "fis/bounds.hpp"
#include "fis/data.hpp"
#include "fis/sampling.hpp"

namespace fis {

enum class Command { RunErm, RunFis, RunBaseline, VerifyInfluence, VerifyBounds };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

struct CsvSource {
  std::filesystem::path path;
  CsvSchema schema;
  SplitFractions fractions;
  bool balance = false;
  bool standardize = true;
};

struct GroupShiftSource {
  GroupShiftSpec spec;
};

struct MixtureSource {
  MixtureSpec spec;
};

using DatasetSource = std::variant<CsvSource, GroupShiftSource, MixtureSource>;

struct InfluenceCheckConfig {
  std::optional<std::filesystem::path> checkpoint;
  std::size_t num_candidates = 200;
  double eta = 1e-3;
  /// The scaling check compares errors at eta and eta / scale_factor.
  double scale_factor = 10.0;
};

struct BoundSweepConfig {
  BoundConfig bound;
  std::size_t trials = 20;
  int group = 0;
  /// Blend frequencies_test toward a random simplex point, more strongly in
  /// later trials. When false every trial uses the configured vectors.
  bool sweep_test_frequencies = true;
};

struct ExperimentConfig {
  std::optional<Command> command;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "fis-out";
  std::size_t threads = 1;
  DatasetSource dataset;
  FisConfig fis;
  BaselineKind baseline = BaselineKind::Random;
  InfluenceCheckConfig influence;
  BoundSweepConfig bounds;
};

/// Parses and validates a JSON experiment config. Relative paths resolve
/// against the config file's directory; every referenced file must exist.
/// Errors name the offending field.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Fully resolved config (all defaults written out) as pretty JSON. Feeding
/// it back to parse_experiment_config yields the same experiment.
std::string resolved_config_text(const ExperimentConfig& cfg);
/// Hash of the resolved config with output location and thread count removed.
std::string config_hash(const ExperimentConfig& cfg);

/// Derived per-stage seeds.
std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage);

/// Materializes the configured dataset source as a split bundle.
SplitBundle build_bundle(const ExperimentConfig& cfg);

struct CliOptions {
  Command command = Command::RunFis;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

/// Runs one subcommand end to end. Returns the process exit status;
/// diagnostics go to `err`, progress lines to `out`.
int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace fis
