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

#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "fis/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fair influential sampling runner"};
  app.require_subcommand(1);

  fis::CliOptions opts;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  const std::pair<fis::Command, const char*> commands[] = {
      {fis::Command::RunErm, "train the warm-start model on labeled data only"},
      {fis::Command::RunFis, "run fair influential sampling"},
      {fis::Command::RunBaseline, "run a comparison sampler (see baseline.kind)"},
      {fis::Command::VerifyInfluence, "compare first-order influence with retraining"},
      {fis::Command::VerifyBounds, "check the shift bounds on a Gaussian mixture"},
  };
  for (const auto& [c, help] : commands) {
    auto* sub = app.add_subcommand(std::string(fis::to_string(c)), help);
    sub->add_option("--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides config)");
    sub->add_option("--seed", seed, "master seed (overrides config)");
    sub->add_option("--threads", threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    sub->callback([&opts, c = c] { opts.command = c; });
  }

  CLI11_PARSE(app, argc, argv);

  opts.config = config;
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--out") > 0) opts.out = out;
    if (sub->count("--seed") > 0) opts.seed = seed;
    if (sub->count("--threads") > 0) opts.threads = threads;
  }
  return fis::run_cli(opts, std::cout, std::cerr);
}
