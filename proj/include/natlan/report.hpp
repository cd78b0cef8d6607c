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

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "natlan/metrics.hpp"
#include "natlan/pipeline.hpp"

namespace natlan {

enum class Enhancement { baseline, negative, suboptimal, optimal };

std::string_view to_string(Enhancement e);

struct ComparisonRow {
  std::string model;         // speaker backend id
  std::string method_label;
  MethodKind kind = MethodKind::direct;
  std::string language;      // language the speaker reads
  std::string method_fingerprint;
  Ratio avg;
  std::optional<Ratio> avg_hard;
  std::map<Subdomain, Ratio> by_subdomain;
  std::optional<Improvement> delta;  // against the group baseline
  Enhancement enhancement = Enhancement::baseline;
};

struct ComparisonGroup {
  std::string speaker;
  std::vector<ComparisonRow> rows;  // baseline first when present
};

struct ComparisonDocument {
  Weighting weighting = Weighting::per_discipline;
  std::vector<ComparisonGroup> groups;  // first-appearance order
};

using RunSet = std::pair<MethodSpec, MetricsTable>;

/// Groups run sets by speaker. The first direct method of a group is its
/// baseline. Rows below the baseline are negative; among the rest the
/// group maximum is optimal (ties share it) and others are suboptimal.
/// Throws MixedWeighting, or Usage for an empty input.
ComparisonDocument render_comparison(const std::vector<RunSet>& run_sets);

std::string comparison_csv(const ComparisonDocument& doc);
std::string comparison_markdown(const ComparisonDocument& doc);
nlohmann::json to_json(const ComparisonDocument& doc);

/// method,discipline_id,delta_correct,normalized
std::string improvements_csv(const std::vector<ImprovementTable>& tables,
                             const std::vector<std::string>& method_labels);

struct Submission {
  nlohmann::json answers;          // {discipline: {question: letter}}
  std::vector<std::string> audit;  // one note per abstention
};

/// Leaderboard file for a test-split run. Records without an extracted
/// choice get \p abstention and an audit note. Throws WrongSplit when
/// \p split is not test, MissingDiscipline when an expected discipline has
/// no records.
Submission emit_submission(const std::vector<RunRecord>& records, Split split,
                           const std::vector<std::string>& expected_disciplines,
                           Choice abstention = Choice::A);

}  // namespace natlan
