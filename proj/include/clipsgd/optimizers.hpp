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

#ifndef CLIPSGD_OPTIMIZERS_HPP_
#define CLIPSGD_OPTIMIZERS_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clipsgd/point.hpp"
#include "clipsgd/problems.hpp"

namespace clipsgd {

enum class Method { kGd, kClippedGd, kSgd, kClippedSgd, kDpSgd };

std::string_view to_string(Method m);
// Accepts "gd", "clipped_gd", "sgd", "clipped_sgd", "dp_sgd".
std::optional<Method> parse_method(std::string_view s);

inline constexpr double kNoClipping = std::numeric_limits<double>::infinity();

struct RunConfig {
  Method method = Method::kClippedGd;
  double c = kNoClipping;  // must be infinite for gd/sgd, finite otherwise
  double eta = 0.1;
  std::size_t T = 100;
  std::size_t B = 1;
  double sigma_dp = 0.0;   // only dp_sgd may set this above zero
  std::uint64_t seed = 0;
  Point x0;

  // Throws InvalidInput on any violated field constraint.
  void validate() const;
};

// Instrumentation knobs that do not change the trajectory.
struct RunOptions {
  // Record every stride-th iterate; the final iterate is always recorded.
  // Stochastic methods evaluate f and grad f only at recorded iterates.
  std::size_t stride = 1;
  // Abort once ||x_t|| or |f(x_t)| exceeds this.
  double divergence_limit = 1e12;
  // Stop as soon as ||grad f(x_t)|| <= this (the trace then ends early).
  std::optional<double> stop_grad_norm;
};

// State at iterate t and the step taken from it. The record for the last
// iterate has applied_norm = 0 and clipped_fraction = 0 because no step is
// taken from it.
struct TraceRecord {
  std::size_t t = 0;
  double f_val = 0.0;
  double grad_norm = 0.0;        // ||grad f(x_t)|| from the exact oracle
  double applied_norm = 0.0;     // ||g_t|| actually applied, noise included
  double clipped_fraction = 0.0; // share of per-sample gradients clipped
  double max_sample_norm = 0.0;  // largest per-sample norm after clipping
  double noise_sq_norm = 0.0;    // ||z_t||^2 (dp_sgd only)

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  RunConfig config;
  std::vector<TraceRecord> records;
  // Over recorded iterates.
  double min_grad_norm = std::numeric_limits<double>::infinity();
  double max_grad_norm = 0.0;
  // First t with ||grad f(x_t)|| <= RunOptions::stop_grad_norm, if set.
  std::optional<std::size_t> hit_target_at;
  Point final_point;
  std::size_t iterations = 0;  // steps actually taken
};

// Thrown when an iterate becomes non-finite or exceeds the divergence limit.
// Carries the trace up to and including the offending iterate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, Trace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const Trace& trace() const { return trace_; }

 private:
  Trace trace_;
};

// Deterministic x_{t+1} = x_t - eta clip_c(grad f(x_t)). Method gd or
// clipped_gd.
Trace run_gd(const Problem& problem, const RunConfig& config,
             const RunOptions& options = {});

// x_{t+1} = x_t - eta (1/B) sum_i clip_c(grad f_xi_i(x_t)), each sample
// clipped before averaging. Method sgd or clipped_sgd.
Trace run_clipped_sgd(const Problem& problem, const RunConfig& config,
                      const RunOptions& options = {});

// Clipped minibatch step plus z_t ~ N(0, sigma_dp^2 / d I). Method dp_sgd.
Trace run_dp_sgd(const Problem& problem, const RunConfig& config,
                 const RunOptions& options = {});

// Dispatches on config.method.
Trace run(const Problem& problem, const RunConfig& config,
          const RunOptions& options = {});

}  // namespace clipsgd

#endif  // CLIPSGD_OPTIMIZERS_HPP_
