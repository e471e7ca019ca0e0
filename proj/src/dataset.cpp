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

#include "clipsgd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "clipsgd/error.hpp"
#include "clipsgd/format.hpp"
#include "clipsgd/rng.hpp"

namespace clipsgd {
namespace {

constexpr int kPowerIterationCap = 1000;
constexpr double kPowerIterationTol = 1e-8;

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

int parse_label(std::string_view tok, std::size_t line) {
  if (tok == "+1" || tok == "1") return 1;
  if (tok == "-1" || tok == "0") return -1;
  throw ParseError(line, "unmappable label '" + std::string(tok) + "'");
}

// y = A x, A given by the dataset rows.
void multiply(const Dataset& ds, const std::vector<double>& x,
              std::vector<double>& y) {
  y.assign(ds.n(), 0.0);
  for (std::size_t r = 0; r < ds.n(); ++r) {
    const SparseRow& row = ds.rows[r];
    double s = 0.0;
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      s += row.values[k] * x[row.indices[k] - 1];
    }
    y[r] = s;
  }
}

// x = A^T y
void multiply_transpose(const Dataset& ds, const std::vector<double>& y,
                        std::vector<double>& x) {
  x.assign(ds.dim, 0.0);
  for (std::size_t r = 0; r < ds.n(); ++r) {
    const SparseRow& row = ds.rows[r];
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      x[row.indices[k] - 1] += row.values[k] * y[r];
    }
  }
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  Dataset ds;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    std::istringstream tokens{std::string(line)};
    std::string tok;
    tokens >> tok;
    const int label = parse_label(tok, line_no);

    SparseRow row;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(line_no, "malformed feature token '" + tok + "'");
      }
      std::uint32_t idx = 0;
      const char* ib = tok.data();
      const char* ie = tok.data() + colon;
      const auto ires = std::from_chars(ib, ie, idx);
      if (ires.ec != std::errc() || ires.ptr != ie || idx == 0) {
        throw ParseError(line_no, "bad feature index in '" + tok + "'");
      }
      const auto val =
          parse_double(std::string_view(tok).substr(colon + 1));
      if (!val || !std::isfinite(*val)) {
        throw ParseError(line_no, "bad feature value in '" + tok + "'");
      }
      if (!row.indices.empty() && idx <= row.indices.back()) {
        throw ParseError(line_no, "feature indices not strictly increasing");
      }
      row.indices.push_back(idx);
      row.values.push_back(*val);
    }
    if (!row.indices.empty()) {
      ds.dim = std::max<std::size_t>(ds.dim, row.indices.back());
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  if (ds.rows.empty()) throw ParseError(0, "dataset has no rows");
  return ds;
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  for (std::size_t r = 0; r < ds.n(); ++r) {
    out << (ds.labels[r] > 0 ? "+1" : "-1");
    const SparseRow& row = ds.rows[r];
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      out << ' ' << row.indices[k] << ':' << format_double(row.values[k]);
    }
    out << '\n';
  }
}

double gram_lambda_max(const Dataset& ds) {
  if (ds.dim == 0 || ds.n() == 0) return 0.0;
  std::vector<double> v(ds.dim, 1.0 / std::sqrt(static_cast<double>(ds.dim)));
  std::vector<double> av;
  std::vector<double> w;
  double lambda = 0.0;
  for (int it = 0; it < kPowerIterationCap; ++it) {
    multiply(ds, v, av);
    multiply_transpose(ds, av, w);
    const double wn = norm(w);
    if (wn == 0.0) return 0.0;
    // ||A^T A v|| for unit v.
    const double next = wn;
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / wn;
    const bool converged =
        it > 0 && std::abs(next - lambda) <= kPowerIterationTol * next;
    lambda = next;
    if (converged) break;
  }
  return lambda;
}

double estimate_L(const Dataset& ds) {
  if (ds.n() == 0) return 0.0;
  return gram_lambda_max(ds) / (4.0 * static_cast<double>(ds.n()));
}

Dataset subsample(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > ds.n()) {
    throw InvalidInput("subsample: k must be in [1, n]");
  }
  std::vector<std::size_t> idx(ds.n());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  KeyedRng rng(seed, Stream::kSubsample);
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(ds.n() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  Dataset out;
  out.dim = ds.dim;
  out.rows.reserve(k);
  out.labels.reserve(k);
  for (std::size_t i : idx) {
    out.rows.push_back(ds.rows[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

Dataset make_w1a_like(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("make_w1a_like: n must be positive");
  constexpr std::size_t kFeatures = 300;
  constexpr double kPositiveRate = 0.03;

  KeyedRng feat_rng(seed, Stream::kSynthetic, 0);
  std::vector<double> activation(kFeatures);
  std::vector<double> weight(kFeatures);
  for (std::size_t j = 0; j < kFeatures; ++j) {
    const double u = feat_rng.uniform();
    // Mean of u^3 is 1/4, so the expected row density is 0.039 * 300 = 11.7.
    activation[j] = 0.156 * u * u * u;
    weight[j] = feat_rng.normal();
  }

  Dataset ds;
  ds.dim = kFeatures;
  std::vector<double> score(n);
  for (std::size_t r = 0; r < n; ++r) {
    KeyedRng rng(seed, Stream::kSynthetic, 1, r);
    SparseRow row;
    double s = 0.0;
    for (std::size_t j = 0; j < kFeatures; ++j) {
      if (rng.uniform() < activation[j]) {
        row.indices.push_back(static_cast<std::uint32_t>(j + 1));
        row.values.push_back(1.0);
        s += weight[j];
      }
    }
    score[r] = s + rng.normal();
    ds.rows.push_back(std::move(row));
  }
  std::vector<double> sorted = score;
  const auto n_pos = static_cast<std::size_t>(
      std::ceil(kPositiveRate * static_cast<double>(n)));
  std::nth_element(sorted.begin(), sorted.begin() + (n - n_pos), sorted.end());
  const double threshold = sorted[n - n_pos];
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    ds.labels[r] = score[r] >= threshold ? 1 : -1;
  }
  return ds;
}

std::vector<double> dense_row(const Dataset& ds, std::size_t i) {
  std::vector<double> out(ds.dim, 0.0);
  const SparseRow& row = ds.rows.at(i);
  for (std::size_t k = 0; k < row.nnz(); ++k) {
    out[row.indices[k] - 1] = row.values[k];
  }
  return out;
}

}  // namespace clipsgd
