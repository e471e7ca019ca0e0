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

#include "clipsgd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clipsgd/clip.hpp"
#include "clipsgd/error.hpp"
#include "clipsgd/rng.hpp"

namespace clipsgd {

std::string_view to_string(Theorem t) {
  switch (t) {
    case Theorem::kDetNonconvex: return "det_nonconvex";
    case Theorem::kDetConvex: return "det_convex";
    case Theorem::kDetStronglyConvex: return "det_strongly_convex";
    case Theorem::kStochNonconvex: return "stoch_nonconvex";
    case Theorem::kDpSgd: return "dp_sgd";
  }
  return "unknown";
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kSmallC: return "small_c";
    case Regime::kLargeC: return "large_c";
    case Regime::kNotApplicable: return "n_a";
  }
  return "unknown";
}

std::string_view to_string(ConstantsSource s) {
  switch (s) {
    case ConstantsSource::kExplicit: return "explicit";
    case ConstantsSource::kDerived: return "derived";
    case ConstantsSource::kOrderOfMagnitude: return "order_of_magnitude";
  }
  return "unknown";
}

std::optional<Theorem> parse_theorem(std::string_view s) {
  for (Theorem t : {Theorem::kDetNonconvex, Theorem::kDetConvex,
                    Theorem::kDetStronglyConvex, Theorem::kStochNonconvex,
                    Theorem::kDpSgd}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

std::string_view to_string(SmoothnessCheck k) {
  switch (k) {
    case SmoothnessCheck::kGradientLipschitz: return "gradient_lipschitz";
    case SmoothnessCheck::kDescentLemma: return "descent_lemma";
    case SmoothnessCheck::kGradientDomination: return "gradient_domination";
  }
  return "unknown";
}

namespace {

double local_smoothness(double L0, double L1, double c) {
  return L1 == 0.0 ? L0 : L0 + c * L1;
}

}  // namespace

double RateParams::local_smoothness() const {
  return clipsgd::local_smoothness(L0, L1, c);
}

double max_stepsize(Theorem theorem, double L0, double L1, double c) {
  const double s = local_smoothness(L0, L1, c);
  if (!(s > 0.0)) {
    throw InvalidInput("max_stepsize: L0 + c L1 must be positive");
  }
  switch (theorem) {
    case Theorem::kDetConvex:
    case Theorem::kDetStronglyConvex:
      return 1.0 / (2.0 * s);
    case Theorem::kDetNonconvex:
    case Theorem::kStochNonconvex:
    case Theorem::kDpSgd:
      return 1.0 / (9.0 * s);
  }
  return 0.0;
}

namespace {

bool stepsize_within(Theorem th, const RateParams& p) {
  return p.eta <= max_stepsize(th, p.L0, p.L1, p.c);
}

// 1/c, with 1/inf = 0.
double inverse(double c) { return std::isinf(c) ? 0.0 : 1.0 / c; }

}  // namespace

BoundReport bound_det_convex(const RateParams& p) {
  BoundReport r;
  r.theorem = Theorem::kDetConvex;
  r.constants_source = ConstantsSource::kExplicit;
  r.regime = Regime::kNotApplicable;
  r.stepsize_ok = stepsize_within(r.theorem, p);
  const double t1 = static_cast<double>(p.T) + 1.0;
  const double r0sq = p.R0 * p.R0;
  const double inv_c = inverse(p.c);
  const double leading = 2.0 * r0sq / (p.eta * t1);
  const double clipping = 4.0 * p.effective_L() * r0sq * r0sq * inv_c * inv_c /
                          (p.eta * p.eta * t1 * t1);
  r.terms = {{"leading", leading}, {"clipping", clipping}};
  r.predicted = leading + clipping;
  r.note = "bound on f(x_T) - f*";
  return r;
}

BoundReport bound_det_strongly_convex(const RateParams& p, double epsilon) {
  if (!(p.mu > 0.0)) {
    throw InvalidInput("bound_det_strongly_convex requires mu > 0");
  }
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
  BoundReport r;
  r.theorem = Theorem::kDetStronglyConvex;
  r.constants_source = ConstantsSource::kDerived;
  r.stepsize_ok = stepsize_within(r.theorem, p);
  r.note = "iterations until ||x_T - x*||^2 <= epsilon";
  const double r0sq = p.R0 * p.R0;
  if (epsilon >= r0sq) {
    r.predicted = 0.0;
    r.terms = {{"halving", 0.0}, {"small_gradient", 0.0}};
    return r;
  }
  const double L = p.effective_L();
  const double inv_c = inverse(p.c);
  const double phases = std::ceil(std::log2(r0sq / epsilon));
  const double phase_len =
      std::max(16.0 / (p.mu * p.eta),
               6.0 * p.R0 * std::sqrt(L) * inv_c / (p.eta * std::sqrt(p.mu)));
  const double halving = phase_len * phases;
  const double t0 = 8.0 * L * r0sq * inv_c * inv_c / p.eta;
  const double small_gradient = t0 + std::log(r0sq / epsilon) / (p.eta * p.mu);
  r.terms = {{"halving", halving},
             {"small_gradient", small_gradient},
             {"t0", t0}};
  r.predicted = std::min(halving, small_gradient);
  return r;
}

BoundReport bound_stoch_nonconvex(const RateParams& p) {
  BoundReport r;
  r.theorem = Theorem::kStochNonconvex;
  r.constants_source = ConstantsSource::kDerived;
  r.stepsize_ok = stepsize_within(r.theorem, p);
  const double t1 = static_cast<double>(p.T) + 1.0;
  if (p.c < 4.0 * p.sigma) {
    r.regime = Regime::kSmallC;
    const double noise = 6.0 * p.sigma;
    const double descent = 18.0 * p.F0 / (p.eta * p.c * t1);
    r.terms = {{"noise_level", noise}, {"descent", descent}};
    r.predicted = std::max(noise, descent);
    r.note = "bound on min_t ||grad f(x_t)||";
    return r;
  }
  r.regime = Regime::kLargeC;
  const double inv_c = inverse(p.c);
  const double s2 = p.sigma * p.sigma;
  const double opt = p.F0 / (p.eta * t1);
  const double var = p.eta * p.local_smoothness() * s2;
  const double bias = 4.0 * s2 * s2 * inv_c * inv_c;
  const double q = opt + var + bias;
  r.terms = {{"optimization", opt}, {"variance", var}, {"bias", bias}};
  r.predicted = std::sqrt(8.0 * q) + 8.0 * q * inv_c;
  r.note = "bound on mean_t ||grad f(x_t)|| over t = 0..T";
  return r;
}

BoundReport bound_det_nonconvex(const RateParams& p) {
  RateParams q = p;
  q.sigma = 0.0;
  BoundReport r = bound_stoch_nonconvex(q);
  r.theorem = Theorem::kDetNonconvex;
  r.stepsize_ok = stepsize_within(r.theorem, p);
  return r;
}

BoundReport bound_dp_sgd(const RateParams& p) {
  BoundReport r;
  r.theorem = Theorem::kDpSgd;
  r.constants_source = ConstantsSource::kOrderOfMagnitude;
  r.stepsize_ok = stepsize_within(r.theorem, p);
  r.regime = p.c < 4.0 * p.sigma ? Regime::kSmallC : Regime::kLargeC;
  const double L = p.L_traj ? *p.L_traj : p.local_smoothness();
  const double inv_c = inverse(p.c);
  const double T = static_cast<double>(p.T);
  const double dp_bias = L * p.eta * inv_c * p.sigma_dp * p.sigma_dp;
  const double dp_noise = std::sqrt(L * p.eta * p.sigma_dp);
  const double floor = bias_floor(p.sigma, p.c);
  const double batch_noise =
      std::sqrt(p.eta * L) * p.sigma / std::sqrt(static_cast<double>(p.B));
  const double opt = std::sqrt(p.F0 / (p.eta * T));
  const double clip_opt = p.F0 * inv_c / (p.eta * T);
  r.terms = {{"dp_bias", dp_bias},         {"dp_noise", dp_noise},
             {"clipping_bias", floor},     {"batch_noise", batch_noise},
             {"optimization", opt},        {"clipped_optimization", clip_opt}};
  r.predicted = dp_bias + dp_noise + floor + batch_noise + opt + clip_opt;
  r.note = "gradient-norm scale; bias term min(sigma, sigma^2/c)";
  return r;
}

double bias_floor(double sigma, double c) {
  if (!(sigma >= 0.0)) throw InvalidInput("bias_floor: sigma must be >= 0");
  if (!(c > 0.0)) throw InvalidInput("bias_floor: c must be > 0");
  return std::min(sigma, sigma * sigma * inverse(c));
}

double dp_noise_calibration(double c, std::size_t d, std::size_t T,
                            double epsilon, double delta, double k_dp) {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidInput("delta must lie in (0, 1)");
  }
  if (!(c > 0.0)) throw InvalidInput("c must be > 0");
  return k_dp * c * static_cast<double>(d) *
         std::sqrt(static_cast<double>(T) * std::log(1.0 / delta)) / epsilon;
}

double trajectory_smoothness(const Trace& trace, double L0, double L1) {
  return L0 + L1 * trace.max_grad_norm;
}

// ---------------------------------------------------------------------------

double expected_clipped_grad_1d(double a, double p, double c, double x) {
  return (1.0 - p) * clip_scalar(x, c) + p * clip_scalar(x + a, c);
}

double exact_fixed_point(double a, double p, double c) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidInput("a must be > 0");
  if (!(p >= 0.0 && p < 0.5)) throw InvalidInput("p must lie in [0, 1/2)");
  if (!(c > 0.0)) throw InvalidInput("c must be > 0");
  if (p == 0.0) return 0.0;

  // Only the shifted outcome is clipped: (1 - p) x + p c = 0.
  const double shifted_clipped = -p * c / (1.0 - p);
  if (std::abs(shifted_clipped) <= c && shifted_clipped + a >= c) {
    return shifted_clipped;
  }
  // Nothing clipped: x + p a = 0.
  const double unclipped = -p * a;
  if (std::abs(unclipped) <= c && std::abs(unclipped + a) <= c) {
    return unclipped;
  }

  double lo = -a;
  double hi = 0.0;
  const double h_lo = expected_clipped_grad_1d(a, p, c, lo);
  const double h_hi = expected_clipped_grad_1d(a, p, c, hi);
  if (h_lo > 0.0 || h_hi < 0.0) {
    throw NoFixedPoint("expected clipped gradient has no sign change on [-a, 0]");
  }
  // h is nondecreasing, so bisection keeps h(lo) <= 0 <= h(hi).
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double h = expected_clipped_grad_1d(a, p, c, mid);
    if (h == 0.0) return mid;
    if (h < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(expected_clipped_grad_1d(a, p, c, lo)) <=
                 std::abs(expected_clipped_grad_1d(a, p, c, hi))
             ? lo
             : hi;
}

double exact_fixed_point(const BernoulliShiftQuadratic& problem, double c) {
  return exact_fixed_point(problem.shift(), problem.prob(), c);
}

namespace {

LowerBoundInstance finish_instance(double sigma, double c, double a, double p,
                                   double guarantee, Regime regime) {
  LowerBoundInstance inst;
  inst.sigma = sigma;
  inst.c = c;
  inst.a = a;
  inst.p = p;
  inst.x_fixed = exact_fixed_point(a, p, c);
  inst.bias = std::abs(inst.x_fixed + p * a);
  inst.guarantee = guarantee;
  inst.regime = regime;
  return inst;
}

}  // namespace

LowerBoundInstance build_lower_bound_small_c(double sigma, double c) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidInput("sigma must be finite and > 0");
  }
  if (!(c > 0.0)) throw InvalidInput("c must be > 0");
  if (c > 2.0 * sigma) {
    throw RegimeError("small-c construction requires c <= 2 sigma");
  }
  const double a = 4.0 * sigma;
  const double p = (2.0 - std::sqrt(3.0)) / 4.0;
  return finish_instance(sigma, c, a, p, sigma / 12.0, Regime::kSmallC);
}

LowerBoundInstance build_lower_bound_large_c(double sigma, double c) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidInput("sigma must be finite and > 0");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InvalidInput("c must be finite and > 0");
  }
  if (c < 2.0 * sigma) {
    throw RegimeError("large-c construction requires c >= 2 sigma");
  }
  const double a = 2.0 * c;
  const double q = sigma * sigma / (a * a);  // <= 1/16
  // Smaller root of p^2 - p + q = 0, in the cancellation-free form.
  const double p = 2.0 * q / (1.0 + std::sqrt(1.0 - 4.0 * q));
  return finish_instance(sigma, c, a, p, sigma * sigma / (6.0 * c),
                         Regime::kLargeC);
}

ExpectedClippedGrad expected_clipped_grad(const Problem& problem,
                                          const Point& x, double c,
                                          std::size_t n_samples,
                                          std::uint64_t seed) {
  ExpectedClippedGrad out;
  if (auto exact = problem.expected_clipped_grad_exact(x, c)) {
    out.mean = std::move(*exact);
    out.std_error = Point(x.dim());
    out.exact = true;
    return out;
  }
  if (n_samples < 1) throw InvalidInput("n_samples must be >= 1");
  // Welford, per coordinate.
  const std::size_t d = x.dim();
  Point mean(d);
  Point m2(d);
  for (std::size_t i = 0; i < n_samples; ++i) {
    KeyedRng rng(seed, Stream::kMonteCarlo, 0, i);
    const Point g = clip(problem.sample_grad(x, rng), c);
    const double k = static_cast<double>(i + 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = g[j] - mean[j];
      mean[j] += delta / k;
      m2[j] += delta * (g[j] - mean[j]);
    }
  }
  out.mean = mean;
  out.std_error = Point(d);
  if (n_samples > 1) {
    const double n = static_cast<double>(n_samples);
    for (std::size_t j = 0; j < d; ++j) {
      out.std_error[j] = std::sqrt(m2[j] / (n - 1.0) / n);
    }
  }
  out.n_samples = n_samples;
  return out;
}

// ---------------------------------------------------------------------------

SmoothnessCertificate certify_smoothness(const Problem& problem, double L0,
                                         double L1, std::size_t n_pairs,
                                         double radius_scale,
                                         std::uint64_t seed) {
  if (!(L0 >= 0.0) || !(L1 >= 0.0)) {
    throw InvalidInput("certify_smoothness: L0, L1 must be >= 0");
  }
  if (!(radius_scale > 0.0)) {
    throw InvalidInput("certify_smoothness: radius_scale must be > 0");
  }
  constexpr double kRel = 1e-9;
  const std::size_t d = problem.dim();
  const Point center = problem.meta().x_star.value_or(Point(d));
  const double r_max = L1 > 0.0 ? std::min(radius_scale, 1.0 / L1)
                                 : radius_scale;

  SmoothnessCertificate cert;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    KeyedRng rng(seed, Stream::kCertify, 0, k);
    Point x = center;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] += radius_scale * (2.0 * rng.uniform() - 1.0);
    }
    Point dir(d);
    double dn = 0.0;
    while (dn == 0.0) {
      for (std::size_t j = 0; j < d; ++j) dir[j] = rng.normal();
      dn = dir.norm();
    }
    const double r = r_max * (1.0 - rng.uniform());  // (0, r_max]
    Point y = x;
    y.add_scaled(r / dn, dir);
    const double dist = distance(x, y);

    const Point gx = problem.grad(x);
    const Point gy = problem.grad(y);
    const double gxn = gx.norm();
    const double local = L0 + L1 * gxn;

    const double lip_lhs = distance(gx, gy);
    const double lip_rhs = local * dist;
    if (lip_lhs > lip_rhs * (1.0 + kRel) + kRel * (gxn + gy.norm()) * 1e-3) {
      cert.violations.push_back(
          {SmoothnessCheck::kGradientLipschitz, x, y, lip_lhs, lip_rhs});
    }

    const double fx = problem.value(x);
    const double fy = problem.value(y);
    const double desc_lhs = fy - fx - dot(gx, y - x);
    const double desc_rhs = 0.5 * local * dist * dist;
    const double desc_slack =
        kRel * (std::abs(fx) + std::abs(fy) + gxn * dist + desc_rhs);
    if (desc_lhs > desc_rhs + desc_slack) {
      cert.violations.push_back(
          {SmoothnessCheck::kDescentLemma, x, y, desc_lhs, desc_rhs});
    }
    ++cert.pairs_checked;

    if (const auto f_star = problem.meta().f_star) {
      const double dom_lhs = gxn * gxn;
      const double dom_rhs = 2.0 * local * (fx - *f_star);
      const double dom_slack =
          kRel * (dom_lhs + 2.0 * local * (std::abs(fx) + std::abs(*f_star)));
      if (dom_lhs > dom_rhs + dom_slack) {
        cert.violations.push_back(
            {SmoothnessCheck::kGradientDomination, x, x, dom_lhs, dom_rhs});
      }
      ++cert.domination_checked;
    }
  }
  return cert;
}

ClipProbabilityReport clip_probability_bound(const Problem& problem,
                                             const Point& x, double c,
                                             std::size_t n_samples,
                                             std::uint64_t seed) {
  if (!(c > 0.0)) throw InvalidInput("c must be > 0");
  if (n_samples < 1) throw InvalidInput("n_samples must be >= 1");
  if (!(problem.grad(x).norm() < 0.5 * c)) {
    throw RegimeError("clip_probability_bound requires ||grad f(x)|| < c/2");
  }
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    KeyedRng rng(seed, Stream::kMonteCarlo, 1, i);
    if (problem.sample_grad(x, rng).norm() > c) ++clipped;
  }
  ClipProbabilityReport rep;
  rep.n_samples = n_samples;
  const double n = static_cast<double>(n_samples);
  rep.frequency = static_cast<double>(clipped) / n;
  rep.std_error = std::sqrt(rep.frequency * (1.0 - rep.frequency) / n);
  rep.markov_bound = 4.0 * problem.meta().sigma_sq * inverse(c) * inverse(c);
  rep.within_bound = rep.frequency <= rep.markov_bound + 5.0 * rep.std_error;
  return rep;
}

double finite_difference_error(const Problem& problem, const Point& x) {
  const Point g = problem.grad(x);
  Point fd(x.dim());
  Point probe = x;
  for (std::size_t j = 0; j < x.dim(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    probe[j] = x[j] + h;
    const double up = problem.value(probe);
    probe[j] = x[j] - h;
    const double down = problem.value(probe);
    probe[j] = x[j];
    fd[j] = (up - down) / (2.0 * h);
  }
  return distance(fd, g) / std::max(g.norm(), 1.0);
}

}  // namespace clipsgd
