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

#ifndef CLIPSGD_ERROR_HPP_
#define CLIPSGD_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clipsgd {

// Bad arguments: non-finite coordinates, dimension mismatch, out-of-range
// parameters.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or inconsistent dataset.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed LIBSVM text. line() is 1-based; 0 refers to the whole input.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : DataError("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A lower-bound construction or probability bound was requested outside the
// parameter range where it is defined.
class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// exact_fixed_point found no sign change on its search interval.
class NoFixedPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clipsgd

#endif  // CLIPSGD_ERROR_HPP_
