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

// Executable convergence theory for clipped gradient methods: step-size
// rules, bound predictors with explicit constants, the clipping bias floor,
// the two-outcome lower-bound constructions and their exact fixed points,
// and sampled certificates for the smoothness assumptions.

#ifndef CLIPSGD_THEORY_HPP_
#define CLIPSGD_THEORY_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clipsgd/optimizers.hpp"
#include "clipsgd/point.hpp"
#include "clipsgd/problems.hpp"

namespace clipsgd {

enum class Theorem {
  kDetNonconvex,
  kDetConvex,
  kDetStronglyConvex,
  kStochNonconvex,
  kDpSgd,
};

enum class Regime { kSmallC, kLargeC, kNotApplicable };

// How the constants of a predictor were obtained. kExplicit and kDerived
// predictors are hard upper bounds and are asserted; kOrderOfMagnitude ones
// only carry the shape of an O(.) rate and are reported, never asserted.
enum class ConstantsSource { kExplicit, kDerived, kOrderOfMagnitude };

std::string_view to_string(Theorem t);
std::string_view to_string(Regime r);
std::string_view to_string(ConstantsSource s);
std::optional<Theorem> parse_theorem(std::string_view s);

struct RateParams {
  double F0 = 0.0;  // f(x0) - f*
  double R0 = 0.0;  // ||x0 - x*||
  double L0 = 0.0;
  double L1 = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double c = 1.0;
  double eta = 0.1;
  std::size_t T = 1;
  std::size_t B = 1;
  double sigma_dp = 0.0;
  // Trajectory smoothness max_t (L0 + L1 ||grad f(x_t)||); replaces L when
  // set.
  std::optional<double> L_traj;

  double effective_L() const { return L_traj ? *L_traj : L; }
  // L0 + c L1, with c L1 = 0 when L1 = 0 (c may be infinite).
  double local_smoothness() const;
};

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  Theorem theorem = Theorem::kDetConvex;
  // Bound value; an iteration count for kDetStronglyConvex.
  double predicted = 0.0;
  bool stepsize_ok = false;
  Regime regime = Regime::kNotApplicable;
  ConstantsSource constants_source = ConstantsSource::kExplicit;
  std::vector<BoundTerm> terms;
  std::string note;
};

// Largest step size each theorem admits:
//   det_nonconvex, stoch_nonconvex, dp_sgd: 1 / (9 (L0 + c L1))
//   det_convex, det_strongly_convex:       1 / (2 (L0 + c L1))
// The convex rules use the factor 2 under which the explicit constants are
// actually proven. Throws InvalidInput when L0 + c L1 is not positive.
double max_stepsize(Theorem theorem, double L0, double L1, double c);

// f(x_T) - f* <= 2 R0^2 / (eta (T+1)) + 4 L R0^4 / (eta^2 c^2 (T+1)^2).
BoundReport bound_det_convex(const RateParams& p);

// Iterations until ||x_T - x*||^2 <= epsilon: the smaller of
//   (a) max(16/(mu eta), 6 R0 sqrt(L) / (eta c sqrt(mu))) * ceil(log2(R0^2/eps))
//   (b) 8 L R0^2 / (eta c^2) + ln(R0^2/eps) / (eta mu).
// Branch (a) halves R^2 per phase; branch (b) waits out the clipped phase and
// then contracts by (1 - eta mu) per step. 0 when epsilon >= R0^2.
BoundReport bound_det_strongly_convex(const RateParams& p, double epsilon);

// Gradient-norm bound for clipped SGD with step size <= 1/(9(L0 + c L1)).
//   c < 4 sigma:  min_t ||grad f(x_t)|| <= max(6 sigma, 18 F0 / (eta c (T+1)))
//   c >= 4 sigma: mean_t ||grad f(x_t)|| <= sqrt(8 Q) + 8 Q / c, with
//                 Q = F0/(eta (T+1)) + eta (L0 + c L1) sigma^2 + 4 sigma^4/c^2.
BoundReport bound_stoch_nonconvex(const RateParams& p);

// bound_stoch_nonconvex with sigma = 0, tagged as the deterministic theorem.
BoundReport bound_det_nonconvex(const RateParams& p);

// Order-of-magnitude shape of the DP-SGD rate on the gradient-norm scale:
//   (L eta / c) sigma_dp^2 + sqrt(L eta sigma_dp) + min(sigma, sigma^2/c)
//   + sqrt(eta L) sigma / sqrt(B) + sqrt(F0/(eta T)) + F0/(eta T c),
// with L = L0 + c L1 unless L_traj is given.
BoundReport bound_dp_sgd(const RateParams& p);

// min(sigma, sigma^2 / c).
double bias_floor(double sigma, double c);

// sigma_dp = k_dp * c * d * sqrt(T ln(1/delta)) / epsilon. Throws
// InvalidInput unless epsilon > 0 and 0 < delta < 1.
double dp_noise_calibration(double c, std::size_t d, std::size_t T,
                            double epsilon, double delta, double k_dp = 1.0);

// L0 + L1 * max_t ||grad f(x_t)|| over a trace.
double trajectory_smoothness(const Trace& trace, double L0, double L1);

// ---------------------------------------------------------------------------
// Lower-bound constructions

// Two-outcome quadratic with shift a and probability p whose clipped-SGD
// fixed point x_fixed has |grad f(x_fixed)| = bias >= guarantee.
struct LowerBoundInstance {
  double sigma = 0.0;
  double c = 0.0;
  double a = 0.0;
  double p = 0.0;
  double x_fixed = 0.0;
  double bias = 0.0;
  double guarantee = 0.0;
  Regime regime = Regime::kNotApplicable;

  BernoulliShiftQuadratic problem() const { return {a, p}; }
};

// a = 4 sigma, p = (2 - sqrt 3)/4 so that p (1 - p) = 1/16; guarantee
// sigma / 12. Requires 0 < c <= 2 sigma, else RegimeError.
LowerBoundInstance build_lower_bound_small_c(double sigma, double c);

// a = 2 c, p the smaller root of p (1 - p) = sigma^2 / a^2; guarantee
// sigma^2 / (6 c). Requires c >= 2 sigma > 0, else RegimeError.
LowerBoundInstance build_lower_bound_large_c(double sigma, double c);

// h(x) = (1 - p) clip_c(x) + p clip_c(x + a), the expected clipped
// stochastic gradient of the two-outcome quadratic.
double expected_clipped_grad_1d(double a, double p, double c, double x);

// Root of h on [-a, 0]. Uses the closed forms -p c / (1 - p) (only the
// shifted branch clipped) or -p a (nothing clipped) when their clipping
// pattern is self-consistent, and 200 steps of bisection otherwise. p may be
// 0. Throws NoFixedPoint when h does not change sign on [-a, 0].
double exact_fixed_point(double a, double p, double c);
double exact_fixed_point(const BernoulliShiftQuadratic& problem, double c);

struct ExpectedClippedGrad {
  Point mean;
  Point std_error;  // zero for the exact path
  bool exact = false;
  std::size_t n_samples = 0;
};

// E[clip_c(grad f_xi(x))]: closed form when the problem provides one,
// otherwise a Monte-Carlo mean over n_samples draws keyed by seed.
ExpectedClippedGrad expected_clipped_grad(const Problem& problem,
                                          const Point& x, double c,
                                          std::size_t n_samples,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Certificates

enum class SmoothnessCheck {
  kGradientLipschitz,   // ||g(x) - g(y)|| <= (L0 + L1 ||g(x)||) ||x - y||
  kDescentLemma,        // f(y) <= f(x) + <g(x), y-x> + (L0+L1||g(x)||)/2 ||y-x||^2
  kGradientDomination,  // ||g(x)||^2 <= 2 (L0 + L1 ||g(x)||) (f(x) - f*)
};

std::string_view to_string(SmoothnessCheck k);

struct SmoothnessViolation {
  SmoothnessCheck check;
  Point x;
  Point y;  // equals x for kGradientDomination
  double lhs = 0.0;
  double rhs = 0.0;
};

struct SmoothnessCertificate {
  std::size_t pairs_checked = 0;
  std::size_t domination_checked = 0;
  std::vector<SmoothnessViolation> violations;

  bool ok() const { return violations.empty(); }
};

// Samples n_pairs points x = center + radius_scale * u with u uniform in the
// unit cube (center = x* when known, else 0) and partners y at distance
// uniform in (0, r_max] along a random direction, r_max = min(radius_scale,
// 1/L1). Checks all three inequalities, the last only when f* is known, with
// a 1e-9 relative slack for rounding.
SmoothnessCertificate certify_smoothness(const Problem& problem, double L0,
                                         double L1, std::size_t n_pairs,
                                         double radius_scale,
                                         std::uint64_t seed);

struct ClipProbabilityReport {
  double frequency = 0.0;
  double std_error = 0.0;
  double markov_bound = 0.0;  // 4 sigma^2 / c^2
  std::size_t n_samples = 0;
  bool within_bound = false;  // frequency <= markov_bound + 5 std_error
};

// Empirical Pr[||grad f_xi(x)|| > c] at a point with ||grad f(x)|| < c/2,
// compared with 4 sigma^2 / c^2 (sigma^2 from the problem metadata). Throws
// RegimeError when ||grad f(x)|| >= c/2.
ClipProbabilityReport clip_probability_bound(const Problem& problem,
                                             const Point& x, double c,
                                             std::size_t n_samples,
                                             std::uint64_t seed);

// Central finite differences of value() against grad() at x:
// ||g_fd - grad f(x)|| / max(||grad f(x)||, 1), with per-coordinate step
// 1e-5 * max(1, |x_j|).
double finite_difference_error(const Problem& problem, const Point& x);

}  // namespace clipsgd

#endif  // CLIPSGD_THEORY_HPP_
