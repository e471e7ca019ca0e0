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

#ifndef CLIPSGD_FORMAT_HPP_
#define CLIPSGD_FORMAT_HPP_

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace clipsgd {

// Shortest decimal string that parses back to exactly v. Infinities are
// written as "inf"/"-inf", NaN as "nan".
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Whole-string parse; nullopt on any trailing garbage. Accepts "inf".
inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
  return v;
}

}  // namespace clipsgd

#endif  // CLIPSGD_FORMAT_HPP_
