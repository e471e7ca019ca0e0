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

#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "clipsgd/clip.hpp"
#include "clipsgd/error.hpp"
#include "clipsgd/format.hpp"
#include "clipsgd/point.hpp"
#include "clipsgd/rng.hpp"

namespace clipsgd {
namespace {

TEST(Clip, IdentityInsideBall) {
  EXPECT_EQ(clip(Point{3, 4}, 10), (Point{3, 4}));
}

TEST(Clip, ScalesOntoSphere) {
  const Point v = clip(Point{3, 4}, 2);
  EXPECT_DOUBLE_EQ(v[0], 1.2);
  EXPECT_DOUBLE_EQ(v[1], 1.6);
}

TEST(Clip, ZeroVectorUnchanged) {
  EXPECT_EQ(clip(Point{0, 0}, 1), (Point{0, 0}));
  EXPECT_EQ(clip_coefficient(Point{0, 0}, 1), 1.0);
}

TEST(Clip, Coefficient) {
  EXPECT_DOUBLE_EQ(clip_coefficient(Point{3, 4}, 2), 0.4);
  EXPECT_EQ(clip_coefficient(Point{1, 0}, 5), 1.0);
}

TEST(Clip, BoundaryTakesIdentityBranch) {
  EXPECT_EQ(clip_coefficient(Point{3, 4}, 5), 1.0);
  EXPECT_EQ(clip(Point{3, 4}, 5), (Point{3, 4}));
}

TEST(Clip, RejectsBadInput) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(clip(Point{nan, 1}, 1), InvalidInput);
  EXPECT_THROW(clip(Point{1, 1}, 0), InvalidInput);
  EXPECT_THROW(clip(Point{1, 1}, -1), InvalidInput);
}

TEST(Clip, InfiniteThresholdIsIdentity) {
  const Point u{1e300, -1e300};
  EXPECT_EQ(clip(u, std::numeric_limits<double>::infinity()), u);
}

TEST(ClippedStep, Examples) {
  const Point x = clipped_step(Point{3, 4}, Point{3, 4}, {2, 0.1});
  EXPECT_DOUBLE_EQ(x[0], 2.88);
  EXPECT_DOUBLE_EQ(x[1], 3.84);
  EXPECT_EQ(clipped_step(Point{1}, Point{0}, {0.3, 7}), Point{1});
  EXPECT_EQ(clipped_step(Point{1}, Point{0.5}, {2, 1}), Point{0.5});
}

TEST(ClippedStep, DimensionMismatch) {
  EXPECT_THROW(clipped_step(Point{1, 2}, Point{1}, {1, 1}), InvalidInput);
}

TEST(ClipScalar, MatchesVectorClip) {
  EXPECT_EQ(clip_scalar(5.0, 2.0), 2.0);
  EXPECT_EQ(clip_scalar(-5.0, 2.0), -2.0);
  EXPECT_EQ(clip_scalar(1.5, 2.0), 1.5);
}

// 1e5 random pairs in mixed scales.
TEST(ClipProperties, RandomPairs) {
  std::size_t violations = 0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    KeyedRng rng(7, Stream::kMonteCarlo, 0, k);
    const std::size_t d = 1 + rng.below(6);
    const double scale = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    const double c = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    Point u(d), v(d);
    for (std::size_t j = 0; j < d; ++j) {
      u[j] = scale * rng.normal();
      v[j] = scale * rng.normal();
    }
    const Point cu = clip(u, c);
    const Point cv = clip(v, c);
    const double tol = 1e-12 * (1.0 + c);
    if (cu.norm() > c * (1.0 + 1e-15)) ++violations;
    if (distance(cu, cv) > distance(u, v) + tol) ++violations;
    if (distance(clip(cu, c), cu) > tol) ++violations;
    const double alpha = clip_coefficient(u, c);
    if (!(alpha > 0.0 && alpha <= 1.0)) ++violations;
    if (distance(cu, alpha * u) > 1e-15 * u.norm()) ++violations;
    if (u.norm() <= c && !(cu == u)) ++violations;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Point, NormAvoidsOverflow) {
  EXPECT_DOUBLE_EQ(Point({3e200, 4e200}).norm(), 5e200);
  EXPECT_DOUBLE_EQ(Point({3e-200, 4e-200}).norm(), 5e-200);
}

TEST(Point, Arithmetic) {
  Point a{1, 2};
  a.add_scaled(2, Point{1, 1});
  EXPECT_EQ(a, (Point{3, 4}));
  EXPECT_EQ(dot(a, Point{1, 1}), 7);
  EXPECT_EQ((a - Point{3, 4}), (Point{0, 0}));
  EXPECT_THROW(a += Point{1}, InvalidInput);
}

TEST(KeyedRng, KeysAreIndependent) {
  KeyedRng a(1, Stream::kSample, 0, 0);
  KeyedRng b(1, Stream::kSample, 0, 0);
  KeyedRng c(1, Stream::kSample, 0, 1);
  KeyedRng d(1, Stream::kDpNoise, 0, 0);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(KeyedRng, NormalMoments) {
  KeyedRng rng(3, Stream::kMonteCarlo);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(KeyedRng, BelowCoversRange) {
  KeyedRng rng(4, Stream::kMonteCarlo);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(1e-4), "1e-04");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(*parse_double(format_double(v)), v);
  EXPECT_EQ(*parse_double("+2"), 2.0);
  EXPECT_FALSE(parse_double("2x"));
  EXPECT_TRUE(std::isinf(*parse_double("inf")));
}

}  // namespace
}  // namespace clipsgd
