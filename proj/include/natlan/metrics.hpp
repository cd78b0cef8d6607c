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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "natlan/dataset.hpp"
#include "natlan/pipeline.hpp"

namespace natlan {

/// Exact rational; all aggregation happens here and is only rounded when
/// rendered.
using Ratio = boost::multiprecision::cpp_rational;

/// Exact value of a decimal literal such as "41.2", "-0.05" or "7".
/// Throws Error(ParseError) on anything else.
Ratio parse_decimal(std::string_view s);

/// "103/250" or a decimal literal.
Ratio parse_ratio(std::string_view s);
std::string ratio_to_string(const Ratio& r);

/// r rounded half away from zero to \p decimals places.
std::string format_decimal(const Ratio& r, int decimals);

/// r * 100 rounded half away from zero to \p decimals places, e.g.
/// 0.4125 -> "41.3". Negative zero renders as "0.0".
std::string format_percent(const Ratio& r, int decimals = 1);
/// Same with an explicit sign: "+10.1", "-3.0", "0.0".
std::string format_signed_percent(const Ratio& r, int decimals = 1);
/// Percent value in [0,100] for a decimal literal of percent, e.g. "41.2".
Ratio from_percent(std::string_view s);

enum class Weighting { per_discipline, per_question };

std::string_view to_string(Weighting w);
std::optional<Weighting> parse_weighting(std::string_view s);

struct DisciplineScore {
  std::string discipline_id;
  std::size_t n_questions = 0;
  std::size_t n_correct = 0;

  Ratio accuracy() const;
  bool operator==(const DisciplineScore&) const = default;
};

/// Groups records by discipline. Failed or unextractable records count as
/// incorrect. Disciplines with no records are left out and reported in
/// \p warnings. Throws MissingGold when a record has no defined
/// correctness and UnknownDiscipline for records outside \p disciplines.
std::vector<DisciplineScore> score(const std::vector<RunRecord>& records,
                                   const std::vector<Discipline>& disciplines,
                                   std::vector<std::string>* warnings = nullptr);

struct MetricsTable {
  std::vector<DisciplineScore> scores;  // sorted by discipline id
  Ratio avg;
  std::optional<Ratio> avg_hard;  // absent when no hard discipline scored
  std::map<Subdomain, Ratio> by_subdomain;
  Weighting weighting = Weighting::per_discipline;

  bool operator==(const MetricsTable&) const = default;
};

MetricsTable aggregate(const std::vector<DisciplineScore>& scores,
                       const std::vector<Discipline>& registry, Weighting weighting);

nlohmann::json to_json(const MetricsTable& t);
/// Accepts the output of to_json. Hand-written tables may give only
/// "percent" values ("41.2") for avg, avg_hard and subdomains.
MetricsTable metrics_from_json(const nlohmann::json& j);

struct Improvement {
  Ratio avg;
  std::optional<Ratio> avg_hard;  // present when both tables have one
};

/// method - baseline. Throws TableMismatch when discipline sets or
/// weighting differ.
Improvement improvement(const MetricsTable& method, const MetricsTable& baseline);

/// Per-discipline change in the number of correct answers. Throws
/// TableMismatch unless both cover the same disciplines and question
/// counts.
std::map<std::string, std::int64_t> delta_correct(const std::vector<DisciplineScore>& method,
                                                  const std::vector<DisciplineScore>& baseline);

struct MethodDeltas {
  std::string method_fingerprint;
  std::string baseline_fingerprint;
  std::map<std::string, std::int64_t> delta_correct;
};

struct ImprovementTable {
  std::string method_fingerprint;
  std::string baseline_fingerprint;
  std::vector<std::string> discipline_ids;  // kept disciplines, sorted
  std::vector<std::int64_t> delta_correct;
  std::vector<Ratio> normalized;
  std::vector<std::string> excluded;

  bool operator==(const ImprovementTable&) const = default;
};

/// Min-max normalization of each method's deltas across the shared
/// disciplines. Disciplines where no method has a positive delta are
/// dropped first (when \p exclude_non_improving). If max == min every
/// value maps to 0. Throws TableMismatch when discipline sets differ.
std::vector<ImprovementTable> normalized_relative_improvement(
    const std::vector<MethodDeltas>& methods, bool exclude_non_improving = true);

/// Header: Model,Lang.,STEM,Social Sci.,Human.,Others,Avg.,Avg. (Hard)
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsTable& t, std::string_view model,
                            std::string_view lang);
/// discipline_id,n_questions,n_correct,accuracy
std::string discipline_scores_csv(const std::vector<DisciplineScore>& scores);

}  // namespace natlan
