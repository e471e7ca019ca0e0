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

#ifndef CLIPSGD_CLIP_HPP_
#define CLIPSGD_CLIP_HPP_

#include "clipsgd/point.hpp"

namespace clipsgd {

// Threshold and step size of one clipped update. c may be +infinity, which
// disables clipping.
struct ClipParams {
  double c;
  double eta;

  // Throws InvalidInput unless c > 0 and eta > 0 (and neither is NaN).
  void validate() const;
};

// min(1, c / ||u||). Returns 1 for the zero vector and whenever ||u|| <= c.
double clip_coefficient(const Point& u, double c);

// Euclidean projection of u onto the ball of radius c:
// min(1, c / ||u||) * u. The zero vector is returned unchanged.
Point clip(const Point& u, double c);

// x - eta * clip(g_raw, c).
Point clipped_step(const Point& x, const Point& g_raw, const ClipParams& params);

// Scalar version of clip for one-dimensional problems: sign(u) * min(|u|, c).
double clip_scalar(double u, double c);

}  // namespace clipsgd

#endif  // CLIPSGD_CLIP_HPP_
