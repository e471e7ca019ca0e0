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

#include "clipsgd/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "clipsgd/clip.hpp"
#include "clipsgd/error.hpp"
#include "clipsgd/rng.hpp"

namespace clipsgd {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kGd: return "gd";
    case Method::kClippedGd: return "clipped_gd";
    case Method::kSgd: return "sgd";
    case Method::kClippedSgd: return "clipped_sgd";
    case Method::kDpSgd: return "dp_sgd";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::kGd, Method::kClippedGd, Method::kSgd,
                   Method::kClippedSgd, Method::kDpSgd}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

void RunConfig::validate() const {
  const bool unclipped = method == Method::kGd || method == Method::kSgd;
  if (unclipped && !std::isinf(c)) {
    throw InvalidInput(std::string(to_string(method)) +
                       " requires c = infinity");
  }
  if (!unclipped && !(std::isfinite(c) && c > 0.0)) {
    throw InvalidInput(std::string(to_string(method)) +
                       " requires a finite c > 0");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidInput("eta must be finite and > 0");
  }
  if (B < 1) throw InvalidInput("minibatch size B must be >= 1");
  if (!(sigma_dp >= 0.0) || !std::isfinite(sigma_dp)) {
    throw InvalidInput("sigma_dp must be finite and >= 0");
  }
  if (sigma_dp > 0.0 && method != Method::kDpSgd) {
    throw InvalidInput("sigma_dp > 0 is only valid for dp_sgd");
  }
  if (x0.dim() == 0) throw InvalidInput("x0 must have positive dimension");
  if (!x0.all_finite()) throw InvalidInput("x0 has non-finite coordinates");
}

namespace {

struct Step {
  Point direction;  // g_t, so that x_{t+1} = x_t - eta g_t
  double clipped_fraction = 0.0;
  double max_sample_norm = 0.0;
  double noise_sq_norm = 0.0;
};

Step exact_step(const Point& grad, double c) {
  Step s;
  const double alpha = clip_coefficient(grad, c);
  s.direction = alpha == 1.0 ? grad : alpha * grad;
  s.clipped_fraction = alpha < 1.0 ? 1.0 : 0.0;
  s.max_sample_norm = s.direction.norm();
  return s;
}

Step minibatch_step(const Problem& problem, const RunConfig& cfg,
                    const Point& x, std::size_t t) {
  Step s;
  s.direction = Point(x.dim());
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < cfg.B; ++i) {
    KeyedRng rng(cfg.seed, Stream::kSample, t, i);
    const Point g = problem.sample_grad(x, rng);
    const double alpha = clip_coefficient(g, cfg.c);
    if (alpha < 1.0) ++clipped;
    const Point contribution = alpha == 1.0 ? g : alpha * g;
    s.max_sample_norm = std::max(s.max_sample_norm, contribution.norm());
    s.direction += contribution;
  }
  if (cfg.B > 1) s.direction *= 1.0 / static_cast<double>(cfg.B);
  s.clipped_fraction =
      static_cast<double>(clipped) / static_cast<double>(cfg.B);
  if (cfg.method == Method::kDpSgd && cfg.sigma_dp > 0.0) {
    KeyedRng rng(cfg.seed, Stream::kDpNoise, t);
    const double sd = cfg.sigma_dp / std::sqrt(static_cast<double>(x.dim()));
    double sq = 0.0;
    for (std::size_t j = 0; j < x.dim(); ++j) {
      const double z = sd * rng.normal();
      sq += z * z;
      s.direction[j] += z;
    }
    s.noise_sq_norm = sq;
  }
  return s;
}

Trace run_loop(const Problem& problem, const RunConfig& cfg,
               const RunOptions& opt) {
  cfg.validate();
  if (cfg.x0.dim() != problem.dim()) {
    throw InvalidInput("x0 dimension does not match the problem");
  }
  if (opt.stride < 1) throw InvalidInput("trace stride must be >= 1");

  const bool exact = cfg.method == Method::kGd ||
                     cfg.method == Method::kClippedGd;
  Trace trace;
  trace.config = cfg;
  Point x = cfg.x0;

  for (std::size_t t = 0;; ++t) {
    const bool last = t == cfg.T;
    const bool recorded = last || t % opt.stride == 0;
    const double xnorm = x.norm();
    if (!x.all_finite() || xnorm > opt.divergence_limit) {
      trace.final_point = x;
      trace.iterations = t;
      throw DivergenceError("iterate diverged at t = " + std::to_string(t),
                            std::move(trace));
    }

    std::optional<Point> grad;
    TraceRecord rec;
    rec.t = t;
    if (recorded || exact) {
      grad = problem.grad(x);
      rec.grad_norm = grad->norm();
    }
    if (recorded) {
      rec.f_val = problem.value(x);
      if (!std::isfinite(rec.f_val) || !std::isfinite(rec.grad_norm) ||
          std::abs(rec.f_val) > opt.divergence_limit) {
        trace.records.push_back(rec);
        trace.final_point = x;
        trace.iterations = t;
        throw DivergenceError("objective diverged at t = " + std::to_string(t),
                              std::move(trace));
      }
      trace.min_grad_norm = std::min(trace.min_grad_norm, rec.grad_norm);
      trace.max_grad_norm = std::max(trace.max_grad_norm, rec.grad_norm);
    }

    const bool hit = recorded && opt.stop_grad_norm &&
                     rec.grad_norm <= *opt.stop_grad_norm;
    if (hit && !trace.hit_target_at) trace.hit_target_at = t;
    if (last || hit) {
      trace.records.push_back(rec);
      trace.final_point = x;
      trace.iterations = t;
      return trace;
    }

    const Step step =
        exact ? exact_step(*grad, cfg.c) : minibatch_step(problem, cfg, x, t);
    if (recorded) {
      rec.applied_norm = step.direction.norm();
      rec.clipped_fraction = step.clipped_fraction;
      rec.max_sample_norm = step.max_sample_norm;
      rec.noise_sq_norm = step.noise_sq_norm;
      trace.records.push_back(rec);
    }
    x.add_scaled(-cfg.eta, step.direction);
  }
}

void require_method(const RunConfig& cfg, std::initializer_list<Method> ok,
                    const char* who) {
  if (std::find(ok.begin(), ok.end(), cfg.method) == ok.end()) {
    throw InvalidInput(std::string(who) + " does not run method " +
                       std::string(to_string(cfg.method)));
  }
}

}  // namespace

Trace run_gd(const Problem& problem, const RunConfig& config,
             const RunOptions& options) {
  require_method(config, {Method::kGd, Method::kClippedGd}, "run_gd");
  return run_loop(problem, config, options);
}

Trace run_clipped_sgd(const Problem& problem, const RunConfig& config,
                      const RunOptions& options) {
  require_method(config, {Method::kSgd, Method::kClippedSgd},
                 "run_clipped_sgd");
  return run_loop(problem, config, options);
}

Trace run_dp_sgd(const Problem& problem, const RunConfig& config,
                 const RunOptions& options) {
  require_method(config, {Method::kDpSgd}, "run_dp_sgd");
  return run_loop(problem, config, options);
}

Trace run(const Problem& problem, const RunConfig& config,
          const RunOptions& options) {
  return run_loop(problem, config, options);
}

}  // namespace clipsgd
