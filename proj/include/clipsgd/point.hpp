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

#ifndef CLIPSGD_POINT_HPP_
#define CLIPSGD_POINT_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace clipsgd {

// Dense vector in R^d. Used both for iterates and for gradients.
class Point {
 public:
  Point() = default;
  explicit Point(std::size_t dim, double fill = 0.0) : coords_(dim, fill) {}
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) {}
  Point(std::initializer_list<double> coords) : coords_(coords) {}

  std::size_t dim() const { return coords_.size(); }

  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }

  std::span<const double> coords() const { return coords_; }
  std::span<double> coords() { return coords_; }

  bool all_finite() const;

  // Euclidean norm. Falls back to a rescaled sum when the plain sum of
  // squares overflows.
  double norm() const;
  double squared_norm() const;

  Point& operator+=(const Point& other);
  Point& operator-=(const Point& other);
  Point& operator*=(double s);

  // this += s * other
  Point& add_scaled(double s, const Point& other);

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::vector<double> coords_;
};

Point operator+(Point a, const Point& b);
Point operator-(Point a, const Point& b);
Point operator*(double s, Point a);

double dot(const Point& a, const Point& b);
double distance(const Point& a, const Point& b);

// Throws InvalidInput when the dimensions differ.
void require_same_dim(const Point& a, const Point& b, const char* what);

}  // namespace clipsgd

#endif  // CLIPSGD_POINT_HPP_
