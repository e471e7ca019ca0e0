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

// Config-driven experiment runner behind the clipsgd command-line tool.
//
// A config is flat UTF-8 text, one "key = value" per line, lists separated
// by commas, '#' starting a comment line. Unknown or repeated keys are
// errors. See README.md for the key reference.

#ifndef CLIPSGD_EXPERIMENT_HPP_
#define CLIPSGD_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clipsgd/optimizers.hpp"
#include "clipsgd/problems.hpp"
#include "clipsgd/theory.hpp"

namespace clipsgd {

enum class Mode { kRun, kSweep, kFixedPoint, kCertify, kBound };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitDivergence = 3,
  kExitCheckFailed = 4,
};

struct ProblemSpec {
  // quadratic | bernoulli_shift | chi_square | logistic
  std::string name = "quadratic";

  // quadratic: explicit curvature/center, or isotropic L/2 ||x||^2 in dim.
  // chi_square: dim and L.
  std::size_t dim = 1;
  double L = 1.0;
  std::vector<double> curvature;
  std::vector<double> center;

  // bernoulli_shift: either (a, p) or a lower-bound construction
  // "small_c" / "large_c" at (construction_sigma, construction_c).
  double a = 4.0;
  double p = 0.25;
  std::string construction;
  double construction_sigma = 1.0;
  double construction_c = 1.0;

  // logistic: a LIBSVM path, or "synthetic" for make_w1a_like.
  std::string dataset;
  std::size_t synthetic_n = 2477;
  std::uint64_t synthetic_seed = 0;
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 0;
  LogisticOptions logistic;
};

struct ExperimentConfig {
  std::optional<Mode> mode;
  ProblemSpec problem;

  Method method = Method::kClippedGd;
  std::vector<double> c;  // empty: no clipping (gd / sgd only)
  std::vector<double> eta{0.1};
  std::size_t T = 100;
  std::size_t B = 1;
  std::vector<std::uint64_t> seeds{0};
  double sigma_dp = 0.0;
  // When both are set, sigma_dp is calibrated per c instead.
  std::optional<double> dp_epsilon;
  std::optional<double> dp_delta;
  std::vector<double> x0;  // empty: origin; one value: broadcast

  std::size_t stride = 1;
  std::optional<double> target_grad_norm;
  double divergence_limit = 1e12;

  // fixedpoint
  std::vector<double> sigma;

  // certify
  std::size_t n_pairs = 1000;
  double radius_scale = 1.0;
  std::optional<double> cert_L0;
  std::optional<double> cert_L1;
  std::size_t fd_points = 20;
  std::uint64_t cert_seed = 0;
  std::size_t clip_samples = 100000;

  // bound (and optional bound columns in sweep)
  std::optional<Theorem> theorem;
  double epsilon = 1e-6;  // squared-distance target, strongly convex
  std::string trace;      // read a cmd_run trace instead of running
  std::optional<double> f_star;
  std::optional<double> F0;
  std::optional<double> R0;
  std::optional<double> sigma_bound;

  std::string output;

  // Throws ConfigError on inconsistent fields.
  void validate() const;
  // The c grid with the no-clipping default filled in.
  std::vector<double> c_grid() const;
};

// Throws ConfigError with the offending line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// Throws ConfigError for bad parameters, DataError for unreadable data.
std::unique_ptr<Problem> build_problem(const ProblemSpec& spec);

struct CommandOptions {
  std::filesystem::path out;
  std::uint64_t seed_offset = 0;
  std::size_t threads = 1;
};

// Outcome of a theorem predictor against one run or one group of runs.
struct BoundCheck {
  double predicted = 0.0;
  double observed = 0.0;
  // pass | fail | vacuous (step size too large) | reported (not asserted)
  std::string status;
};

struct SweepRow {
  double c = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::size_t iterations = 0;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  double min_grad_norm = 0.0;
  double mean_grad_norm = 0.0;  // over recorded iterates
  double tail_grad_norm = 0.0;  // over recorded iterates with t >= 3T/4
  std::optional<std::size_t> iters_to_target;
  std::optional<double> best_eta;  // per c, fastest mean time to target
  std::optional<BoundCheck> bound;
};

// Runs every (c, eta, seed) cell, ordered by c, then eta, then seed.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const Problem& problem,
                                std::uint64_t seed_offset,
                                std::size_t threads);

void write_trace_csv(std::ostream& out, const Trace& trace);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Each returns an ExitCode after writing options.out.
int cmd_run(const ExperimentConfig& config, const CommandOptions& options);
int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options);
int cmd_fixedpoint(const ExperimentConfig& config,
                   const CommandOptions& options);
int cmd_certify(const ExperimentConfig& config, const CommandOptions& options);
int cmd_bound(const ExperimentConfig& config, const CommandOptions& options);

// Loads the config, checks its mode, dispatches, and maps exceptions to
// exit codes with a one-line message on err.
int run_command(Mode mode, const std::filesystem::path& config_path,
                const CommandOptions& options, std::ostream& err);

}  // namespace clipsgd

#endif  // CLIPSGD_EXPERIMENT_HPP_
