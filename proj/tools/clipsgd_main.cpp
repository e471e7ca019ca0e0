/*
 * Copyright 2026 The clipsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// clipsgd run|sweep|fixedpoint|certify|bound --config <path> --out <path>
//        [--seed-offset N] [--threads N]

#include <cstdint>
#include <iostream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "clipsgd/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Clipped gradient method experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::uint64_t seed_offset = 0;
  std::size_t threads = 1;
  clipsgd::Mode mode = clipsgd::Mode::kRun;

  const std::pair<clipsgd::Mode, const char*> commands[] = {
      {clipsgd::Mode::kRun, "Single run, per-iteration trace CSV"},
      {clipsgd::Mode::kSweep, "Grid over c x eta x seed, one CSV row per cell"},
      {clipsgd::Mode::kFixedPoint, "Lower-bound instances over sigma x c"},
      {clipsgd::Mode::kCertify, "Smoothness and gradient checks on a problem"},
      {clipsgd::Mode::kBound, "Observed error against the rate predictors"},
  };
  for (const auto& [m, help] : commands) {
    auto* sub = app.add_subcommand(std::string(clipsgd::to_string(m)), help);
    sub->add_option("--config", config_path, "Experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Output file");
    sub->add_option("--seed-offset", seed_offset, "Added to every seed");
    sub->add_option("--threads", threads, "Worker threads for sweeps")
        ->check(CLI::PositiveNumber);
    sub->callback([&mode, m] { mode = m; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : clipsgd::kExitConfig;
  }

  clipsgd::CommandOptions options;
  options.out = out_path;
  options.seed_offset = seed_offset;
  options.threads = threads;
  return clipsgd::run_command(mode, config_path, options, std::cerr);
}
