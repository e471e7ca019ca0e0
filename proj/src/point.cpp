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

#include "clipsgd/point.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clipsgd/error.hpp"

namespace clipsgd {

bool Point::all_finite() const {
  return std::all_of(coords_.begin(), coords_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Point::squared_norm() const {
  double s = 0.0;
  for (double v : coords_) s += v * v;
  return s;
}

namespace {
constexpr double kMinSafe = 1e-280;
}  // namespace

double Point::norm() const {
  const double s = squared_norm();
  if (std::isfinite(s) && s >= kMinSafe) return std::sqrt(s);
  double scale = 0.0;
  for (double v : coords_) scale = std::max(scale, std::abs(v));
  if (!std::isfinite(scale) || scale == 0.0) return scale;
  double r = 0.0;
  for (double v : coords_) {
    const double q = v / scale;
    r += q * q;
  }
  return scale * std::sqrt(r);
}

Point& Point::operator+=(const Point& other) {
  require_same_dim(*this, other, "Point::operator+=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += other[i];
  return *this;
}

Point& Point::operator-=(const Point& other) {
  require_same_dim(*this, other, "Point::operator-=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] -= other[i];
  return *this;
}

Point& Point::operator*=(double s) {
  for (double& v : coords_) v *= s;
  return *this;
}

Point& Point::add_scaled(double s, const Point& other) {
  require_same_dim(*this, other, "Point::add_scaled");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += s * other[i];
  return *this;
}

Point operator+(Point a, const Point& b) { return a += b; }
Point operator-(Point a, const Point& b) { return a -= b; }
Point operator*(double s, Point a) { return a *= s; }

double dot(const Point& a, const Point& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double distance(const Point& a, const Point& b) { return (a - b).norm(); }

void require_same_dim(const Point& a, const Point& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" +
                       std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()) + ")");
  }
}

}  // namespace clipsgd
