// Copyright 2026 The NatLan Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace natlan {

struct ActivationRecord {
  std::string question_id;
  std::string method_id;
  std::vector<float> vector;

  bool operator==(const ActivationRecord&) const = default;
};

/// ACTV1 text dump:
///   ACTV1 d=<dim> n=<count>
///   <question_id>\t<method_id>\t<base64 of dim little-endian float32>
/// one line per record.
struct ActivationDump {
  std::size_t dim = 0;
  std::vector<ActivationRecord> records;
};

/// Throws ParseError (bad header, row shape, count or base64),
/// DimensionMismatch, NonFiniteValue or DuplicateKey, with line numbers.
ActivationDump parse_activations(std::string_view data);
ActivationDump load_activations(const std::string& path);

/// Inverse of parse_activations; the same checks apply.
std::string serialize_activations(const std::vector<ActivationRecord>& records);
void write_activations(const std::string& path, const std::vector<ActivationRecord>& records);

enum class DistanceMetric { cosine, l2 };

std::string_view to_string(DistanceMetric m);
std::optional<DistanceMetric> parse_metric(std::string_view s);

/// cosine: 1 - a.b / (|a||b|), clamped to [0, 2]; l2: |a - b|.
/// Computed in double. Throws DimensionMismatch, or ZeroNorm for cosine.
double activation_distance(std::span<const float> a, std::span<const float> b,
                           DistanceMetric metric);

struct ActivationDiff {
  std::string question_id;
  std::string method_a;
  std::string method_b;
  double cosine = 0;
  double l2 = 0;
};

struct Stats {
  double mean = 0;
  double median = 0;
  double max = 0;
};

struct PairSummary {
  std::string method_a;
  std::string method_b;
  std::size_t n = 0;
  Stats cosine;
  Stats l2;
};

struct DiffSummary {
  std::vector<ActivationDiff> diffs;    // pair order, then question id
  std::vector<PairSummary> summaries;  // one per pair
};

using MethodPair = std::pair<std::string, std::string>;

/// Joins records by question id for each pair. A question seen for one
/// member of a pair but not the other throws MissingCounterpart.
DiffSummary diff_summary(const std::vector<ActivationRecord>& records,
                         const std::vector<MethodPair>& pairs);

/// "a:b,c:d" -> {(a,b),(c,d)}. Throws Usage on malformed input.
std::vector<MethodPair> parse_pairs(std::string_view spec);

/// diffs as CSV: question_id,method_a,method_b,cosine,l2
std::string diffs_csv(const DiffSummary& s);
nlohmann::json to_json(const DiffSummary& s);

/// Records stacked by method then question id, in ACTV1 form, for
/// external dimensionality reduction.
std::string export_matrix(const std::vector<ActivationRecord>& records);

}  // namespace natlan
