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

#include "clipsgd/clip.hpp"

#include <cmath>

#include "clipsgd/error.hpp"

namespace clipsgd {
namespace {

void require_threshold(double c) {
  if (!(c > 0.0)) throw InvalidInput("clipping threshold must be > 0");
}

void require_finite(const Point& u) {
  if (!u.all_finite()) throw InvalidInput("clip: non-finite coordinate");
}

}  // namespace

void ClipParams::validate() const {
  require_threshold(c);
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidInput("step size must be finite and > 0");
  }
}

double clip_coefficient(const Point& u, double c) {
  require_threshold(c);
  require_finite(u);
  const double n = u.norm();
  // ||u|| == c takes the identity branch.
  if (n <= c) return 1.0;
  // Rounding in c / n can leave ||alpha u|| a few ulps above c.
  double alpha = c / n;
  while ((alpha * u).norm() > c) alpha = std::nextafter(alpha, 0.0);
  return alpha;
}

Point clip(const Point& u, double c) {
  const double alpha = clip_coefficient(u, c);
  if (alpha == 1.0) return u;
  return alpha * u;
}

Point clipped_step(const Point& x, const Point& g_raw,
                   const ClipParams& params) {
  params.validate();
  require_same_dim(x, g_raw, "clipped_step");
  Point next = x;
  next.add_scaled(-params.eta, clip(g_raw, params.c));
  return next;
}

double clip_scalar(double u, double c) {
  require_threshold(c);
  if (!std::isfinite(u)) throw InvalidInput("clip: non-finite coordinate");
  if (std::abs(u) <= c) return u;
  return u > 0.0 ? c : -c;
}

}  // namespace clipsgd
