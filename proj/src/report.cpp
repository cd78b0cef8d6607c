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
#include "natlan/report.hpp"

#include <algorithm>
#include <set>

#include "natlan/csv.hpp"
#include "natlan/error.hpp"

namespace natlan {

using nlohmann::json;

std::string_view to_string(Enhancement e) {
  switch (e) {
    case Enhancement::baseline: return "baseline";
    case Enhancement::negative: return "negative";
    case Enhancement::suboptimal: return "suboptimal";
    case Enhancement::optimal: return "optimal";
  }
  return "baseline";
}

ComparisonDocument render_comparison(const std::vector<RunSet>& run_sets) {
  if (run_sets.empty()) throw Error(ErrorCode::Usage, "nothing to compare");
  ComparisonDocument doc;
  doc.weighting = run_sets.front().second.weighting;
  for (const auto& [method, table] : run_sets) {
    if (table.weighting != doc.weighting) {
      throw Error(ErrorCode::MixedWeighting, "run sets mix per_discipline and per_question tables");
    }
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunSet*>> by_speaker;
  for (const RunSet& rs : run_sets) {
    auto [it, fresh] = by_speaker.try_emplace(rs.first.speaker);
    if (fresh) order.push_back(rs.first.speaker);
    it->second.push_back(&rs);
  }

  for (const std::string& speaker : order) {
    const auto& sets = by_speaker[speaker];
    auto base_it = std::find_if(sets.begin(), sets.end(), [](const RunSet* rs) {
      return rs->first.kind == MethodKind::direct;
    });
    const RunSet* base = base_it == sets.end() ? nullptr : *base_it;

    ComparisonGroup group;
    group.speaker = speaker;
    auto make_row = [&](const RunSet& rs) {
      ComparisonRow row;
      row.model = speaker;
      row.method_label = rs.first.label();
      row.kind = rs.first.kind;
      row.language =
          rs.first.uses_transfer() ? rs.first.native_language : rs.first.target_language;
      row.method_fingerprint = rs.first.fingerprint();
      row.avg = rs.second.avg;
      row.avg_hard = rs.second.avg_hard;
      row.by_subdomain = rs.second.by_subdomain;
      return row;
    };
    if (base) group.rows.push_back(make_row(*base));

    std::optional<Ratio> best;
    for (const RunSet* rs : sets) {
      if (rs == base) continue;
      ComparisonRow row = make_row(*rs);
      if (base) row.delta = improvement(rs->second, base->second);
      if (!best || row.avg > *best) best = row.avg;
      group.rows.push_back(std::move(row));
    }
    for (ComparisonRow& row : group.rows) {
      if (base && &row == &group.rows.front()) continue;
      if (base && row.avg < base->second.avg) {
        row.enhancement = Enhancement::negative;
      } else {
        row.enhancement = row.avg == *best ? Enhancement::optimal : Enhancement::suboptimal;
      }
    }
    doc.groups.push_back(std::move(group));
  }
  return doc;
}

namespace {

std::string opt_percent(const std::optional<Ratio>& r) { return r ? format_percent(*r) : ""; }

std::string sub_percent(const ComparisonRow& row, Subdomain s) {
  auto it = row.by_subdomain.find(s);
  return it == row.by_subdomain.end() ? "" : format_percent(it->second);
}

json opt_ratio(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  return {{"exact", ratio_to_string(*r)}, {"percent", format_percent(*r)}};
}

}  // namespace

std::string comparison_csv(const ComparisonDocument& doc) {
  std::string out = csv::join({"Model", "Method", "Lang.", "STEM", "Social Sci.", "Human.",
                               "Others", "Avg.", "Avg. (Hard)", "Delta Avg.", "Delta Hard",
                               "Enhancement"}) +
                    "\n";
  for (const ComparisonGroup& g : doc.groups) {
    for (const ComparisonRow& r : g.rows) {
      std::vector<std::string> f = {r.model, r.method_label, r.language};
      for (Subdomain s : kSubdomains) f.push_back(sub_percent(r, s));
      f.push_back(format_percent(r.avg));
      f.push_back(opt_percent(r.avg_hard));
      f.push_back(r.delta ? format_signed_percent(r.delta->avg) : "");
      f.push_back(r.delta && r.delta->avg_hard ? format_signed_percent(*r.delta->avg_hard) : "");
      f.push_back(std::string(to_string(r.enhancement)));
      out += csv::join(f) + "\n";
    }
  }
  return out;
}

std::string comparison_markdown(const ComparisonDocument& doc) {
  std::string out =
      "| Model | Method | Lang. | STEM | Social Sci. | Human. | Others | Avg. | Avg. (Hard) | "
      "Class |\n|---|---|---|---:|---:|---:|---:|---:|---:|---|\n";
  auto with_delta = [](const std::string& value, const std::optional<Ratio>& d) {
    if (value.empty() || !d) return value;
    return value + " (" + format_signed_percent(*d) + ")";
  };
  for (const ComparisonGroup& g : doc.groups) {
    for (const ComparisonRow& r : g.rows) {
      out += "| " + r.model + " | " + r.method_label + " | " + r.language + " | ";
      for (Subdomain s : kSubdomains) out += sub_percent(r, s) + " | ";
      out += with_delta(format_percent(r.avg),
                        r.delta ? std::optional<Ratio>(r.delta->avg) : std::nullopt) +
             " | ";
      out += with_delta(opt_percent(r.avg_hard), r.delta ? r.delta->avg_hard : std::nullopt) +
             " | ";
      out += std::string(to_string(r.enhancement)) + " |\n";
    }
  }
  return out;
}

json to_json(const ComparisonDocument& doc) {
  json groups = json::array();
  for (const ComparisonGroup& g : doc.groups) {
    json rows = json::array();
    for (const ComparisonRow& r : g.rows) {
      json subs = json::object();
      for (const auto& [s, v] : r.by_subdomain) subs[std::string(to_string(s))] = opt_ratio(v);
      json delta = nullptr;
      if (r.delta) delta = {{"avg", opt_ratio(r.delta->avg)}, {"avg_hard", opt_ratio(r.delta->avg_hard)}};
      rows.push_back({{"model", r.model},
                      {"method", r.method_label},
                      {"kind", to_string(r.kind)},
                      {"language", r.language},
                      {"method_fingerprint", r.method_fingerprint},
                      {"avg", opt_ratio(r.avg)},
                      {"avg_hard", opt_ratio(r.avg_hard)},
                      {"by_subdomain", subs},
                      {"delta", delta},
                      {"enhancement", to_string(r.enhancement)}});
    }
    groups.push_back({{"speaker", g.speaker}, {"rows", rows}});
  }
  return {{"weighting", to_string(doc.weighting)}, {"groups", groups}};
}

std::string improvements_csv(const std::vector<ImprovementTable>& tables,
                             const std::vector<std::string>& method_labels) {
  std::string out = "method,discipline_id,delta_correct,normalized\n";
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const ImprovementTable& table = tables[t];
    const std::string label =
        t < method_labels.size() ? method_labels[t] : table.method_fingerprint;
    for (std::size_t i = 0; i < table.discipline_ids.size(); ++i) {
      out += csv::join({label, table.discipline_ids[i], std::to_string(table.delta_correct[i]),
                        format_decimal(table.normalized[i], 4)}) +
             "\n";
    }
  }
  return out;
}

Submission emit_submission(const std::vector<RunRecord>& records, Split split,
                           const std::vector<std::string>& expected_disciplines,
                           Choice abstention) {
  if (split != Split::test) {
    throw Error(ErrorCode::WrongSplit, "submissions are built from test-split runs, got " +
                                           std::string(to_string(split)));
  }
  Submission out;
  out.answers = json::object();
  for (const RunRecord& r : records) {
    char letter = to_char(abstention);
    if (r.extracted) {
      letter = to_char(*r.extracted);
    } else {
      out.audit.push_back(r.discipline_id + "/" + r.question_id + ": no extracted choice, filled with " +
                          std::string(1, letter));
    }
    out.answers[r.discipline_id][r.question_id] = std::string(1, letter);
  }
  for (const std::string& d : expected_disciplines) {
    if (!out.answers.contains(d)) {
      throw Error(ErrorCode::MissingDiscipline, "no test records for discipline " + d);
    }
  }
  return out;
}

}  // namespace natlan
