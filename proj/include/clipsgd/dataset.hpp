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

#ifndef CLIPSGD_DATASET_HPP_
#define CLIPSGD_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace clipsgd {

// One LIBSVM feature row. Indices are 1-based and strictly increasing, as in
// the file; coordinate i of a dense vector corresponds to index i + 1.
struct SparseRow {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }

  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

// Binary-labelled sparse dataset. labels[i] is +1 or -1.
struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<int> labels;
  // Largest feature index present, or larger if set explicitly.
  std::size_t dim = 0;

  std::size_t n() const { return rows.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Parses "label idx:val idx:val ..." lines. Blank lines and lines starting
// with '#' are skipped; trailing "# ..." comments are ignored. Labels "+1" and
// "1" map to +1, "-1" and "0" to -1; anything else is a ParseError. Throws
// ParseError on malformed tokens, non-increasing indices, non-finite values,
// or an input with no rows.
Dataset parse_libsvm(std::istream& in);

// Throws DataError when the file cannot be opened.
Dataset load_libsvm(const std::filesystem::path& path);

// Writes LIBSVM text that parse_libsvm reads back to an identical Dataset.
void write_libsvm(std::ostream& out, const Dataset& ds);

// lambda_max(A^T A) / (4 n) by power iteration from the normalized all-ones
// vector. This bounds the spectral norm of the logistic-loss Hessian
// (1/n) A^T D A, whose diagonal weights D are at most 1/4.
double estimate_L(const Dataset& ds);

// Largest eigenvalue of A^T A (the quantity estimate_L scales).
double gram_lambda_max(const Dataset& ds);

// k rows drawn without replacement, kept in their original order. Same seed
// gives the same rows. dim is inherited from ds. Throws InvalidInput unless
// 1 <= k <= n.
Dataset subsample(const Dataset& ds, std::size_t k, std::uint64_t seed);

// Deterministic stand-in with the shape of w1a: 300 binary features, about
// 11.7 active features per row, about 3% positive labels.
Dataset make_w1a_like(std::size_t n, std::uint64_t seed);

// Dense copy of row i (length ds.dim).
std::vector<double> dense_row(const Dataset& ds, std::size_t i);

}  // namespace clipsgd

#endif  // CLIPSGD_DATASET_HPP_
