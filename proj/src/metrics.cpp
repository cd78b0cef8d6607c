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
#include "natlan/metrics.hpp"

#include <algorithm>
#include <set>

#include "natlan/csv.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace natlan {

using boost::multiprecision::cpp_int;
using nlohmann::json;

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

cpp_int pow10(int n) {
  cpp_int p = 1;
  for (int i = 0; i < n; ++i) p *= 10;
  return p;
}

// |r| * 10^decimals, rounded half up, as a decimal digit string.
std::string scaled_digits(const Ratio& r, int decimals) {
  const Ratio a = abs(r) * Ratio(pow10(decimals));
  const cpp_int num = boost::multiprecision::numerator(a);
  const cpp_int den = boost::multiprecision::denominator(a);
  cpp_int q = num / den;
  const cpp_int rem = num % den;
  if (rem * 2 >= den) ++q;
  std::string digits = q.str();
  if (decimals > 0) {
    if (digits.size() <= static_cast<std::size_t>(decimals)) {
      digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(decimals), 1, '.');
  }
  return digits;
}

bool is_zero_rendering(const std::string& digits) {
  return std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0' || c == '.'; });
}

}  // namespace

Ratio parse_decimal(std::string_view s) {
  const std::string original(s);
  s = text::trim(s);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? "" : s.substr(dot + 1);
  if (!all_digits(whole) || (dot != std::string_view::npos && !all_digits(frac))) {
    throw Error(ErrorCode::ParseError, "not a decimal number: '" + original + "'");
  }
  Ratio value(cpp_int(std::string(whole) + std::string(frac)),
              pow10(static_cast<int>(frac.size())));
  return negative ? Ratio(-value) : value;
}

Ratio parse_ratio(std::string_view s) {
  const std::size_t slash = s.find('/');
  if (slash == std::string_view::npos) return parse_decimal(s);
  const Ratio num = parse_decimal(s.substr(0, slash));
  const std::string_view den_s = text::trim(s.substr(slash + 1));
  if (!all_digits(den_s) || den_s.find_first_not_of('0') == std::string_view::npos) {
    throw Error(ErrorCode::ParseError, "bad ratio: '" + std::string(s) + "'");
  }
  return num / Ratio(cpp_int(std::string(den_s)));
}

std::string ratio_to_string(const Ratio& r) {
  const cpp_int den = boost::multiprecision::denominator(r);
  if (den == 1) return boost::multiprecision::numerator(r).str();
  return boost::multiprecision::numerator(r).str() + "/" + den.str();
}

std::string format_decimal(const Ratio& r, int decimals) {
  const std::string digits = scaled_digits(r, decimals);
  if (r < 0 && !is_zero_rendering(digits)) return "-" + digits;
  return digits;
}

std::string format_percent(const Ratio& r, int decimals) {
  return format_decimal(r * 100, decimals);
}

std::string format_signed_percent(const Ratio& r, int decimals) {
  const std::string digits = scaled_digits(r * 100, decimals);
  if (is_zero_rendering(digits)) return digits;
  return (r < 0 ? "-" : "+") + digits;
}

Ratio from_percent(std::string_view s) { return parse_decimal(s) / 100; }

std::string_view to_string(Weighting w) {
  return w == Weighting::per_question ? "per_question" : "per_discipline";
}

std::optional<Weighting> parse_weighting(std::string_view s) {
  if (s == "per_discipline") return Weighting::per_discipline;
  if (s == "per_question") return Weighting::per_question;
  return std::nullopt;
}

Ratio DisciplineScore::accuracy() const {
  if (n_questions == 0) return Ratio(0);
  return Ratio(cpp_int(n_correct), cpp_int(n_questions));
}

std::vector<DisciplineScore> score(const std::vector<RunRecord>& records,
                                   const std::vector<Discipline>& disciplines,
                                   std::vector<std::string>* warnings) {
  std::map<std::string, DisciplineScore> by_id;
  for (const Discipline& d : disciplines) by_id[d.id].discipline_id = d.id;
  for (const RunRecord& r : records) {
    auto it = by_id.find(r.discipline_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::UnknownDiscipline, "record for unknown discipline " + r.discipline_id);
    }
    if (!r.correct) {
      throw Error(ErrorCode::MissingGold,
                  r.discipline_id + "/" + r.question_id + " has no gold label");
    }
    ++it->second.n_questions;
    if (*r.correct && !r.error) ++it->second.n_correct;
  }
  std::vector<DisciplineScore> out;
  for (auto& [id, s] : by_id) {
    if (s.n_questions == 0) {
      if (warnings) warnings->push_back(id + ": no records, excluded from scoring");
      continue;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

Ratio weighted(const std::vector<const DisciplineScore*>& group, Weighting w) {
  if (group.empty()) return Ratio(0);
  if (w == Weighting::per_discipline) {
    Ratio sum = 0;
    for (const DisciplineScore* s : group) sum += s->accuracy();
    return sum / Ratio(cpp_int(group.size()));
  }
  std::size_t correct = 0, total = 0;
  for (const DisciplineScore* s : group) {
    correct += s->n_correct;
    total += s->n_questions;
  }
  return total == 0 ? Ratio(0) : Ratio(cpp_int(correct), cpp_int(total));
}

json ratio_json(const Ratio& r) {
  return {{"exact", ratio_to_string(r)}, {"percent", format_percent(r)}};
}

Ratio ratio_from(const json& j) {
  if (j.is_object()) {
    if (j.contains("exact")) return parse_ratio(j["exact"].get<std::string>());
    return from_percent(j.at("percent").get<std::string>());
  }
  if (j.is_string()) return from_percent(j.get<std::string>());
  throw Error(ErrorCode::ParseError, "metric value must be an object or a percent string");
}

}  // namespace

MetricsTable aggregate(const std::vector<DisciplineScore>& scores,
                       const std::vector<Discipline>& registry, Weighting weighting) {
  std::map<std::string, const Discipline*, std::less<>> index;
  for (const Discipline& d : registry) index[d.id] = &d;

  MetricsTable t;
  t.weighting = weighting;
  t.scores = scores;
  std::sort(t.scores.begin(), t.scores.end(),
            [](const DisciplineScore& a, const DisciplineScore& b) {
              return a.discipline_id < b.discipline_id;
            });

  std::vector<const DisciplineScore*> all, hard;
  std::map<Subdomain, std::vector<const DisciplineScore*>> subs;
  for (const DisciplineScore& s : t.scores) {
    auto it = index.find(s.discipline_id);
    if (it == index.end()) {
      throw Error(ErrorCode::UnknownDiscipline, "score for unknown discipline " + s.discipline_id);
    }
    all.push_back(&s);
    if (it->second->is_hard) hard.push_back(&s);
    subs[it->second->subdomain].push_back(&s);
  }
  t.avg = weighted(all, weighting);
  if (!hard.empty()) t.avg_hard = weighted(hard, weighting);
  for (const auto& [sub, group] : subs) t.by_subdomain[sub] = weighted(group, weighting);
  return t;
}

json to_json(const MetricsTable& t) {
  json scores = json::array();
  for (const DisciplineScore& s : t.scores) {
    scores.push_back({{"discipline_id", s.discipline_id},
                      {"n_questions", s.n_questions},
                      {"n_correct", s.n_correct},
                      {"accuracy", ratio_json(s.accuracy())}});
  }
  json subs = json::object();
  for (const auto& [sub, r] : t.by_subdomain) subs[std::string(to_string(sub))] = ratio_json(r);
  return {{"weighting", to_string(t.weighting)},
          {"avg", ratio_json(t.avg)},
          {"avg_hard", t.avg_hard ? ratio_json(*t.avg_hard) : json(nullptr)},
          {"by_subdomain", subs},
          {"scores", scores}};
}

MetricsTable metrics_from_json(const json& j) {
  try {
    MetricsTable t;
    const auto w = parse_weighting(j.value("weighting", std::string("per_discipline")));
    if (!w) throw Error(ErrorCode::ParseError, "unknown weighting");
    t.weighting = *w;
    t.avg = ratio_from(j.at("avg"));
    if (j.contains("avg_hard") && !j["avg_hard"].is_null()) t.avg_hard = ratio_from(j["avg_hard"]);
    if (j.contains("by_subdomain")) {
      for (const auto& [key, value] : j["by_subdomain"].items()) {
        const auto sub = parse_subdomain(key);
        if (!sub) throw Error(ErrorCode::UnknownSubdomain, "unknown subdomain " + key);
        t.by_subdomain[*sub] = ratio_from(value);
      }
    }
    for (const json& s : j.value("scores", json::array())) {
      DisciplineScore d;
      d.discipline_id = s.at("discipline_id").get<std::string>();
      d.n_questions = s.at("n_questions").get<std::size_t>();
      d.n_correct = s.at("n_correct").get<std::size_t>();
      if (d.n_correct > d.n_questions) {
        throw Error(ErrorCode::ParseError, d.discipline_id + ": n_correct > n_questions");
      }
      t.scores.push_back(std::move(d));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("metrics: ") + e.what());
  }
}

namespace {

std::vector<std::string> ids_of(const std::vector<DisciplineScore>& scores) {
  std::vector<std::string> ids;
  for (const DisciplineScore& s : scores) ids.push_back(s.discipline_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

Improvement improvement(const MetricsTable& method, const MetricsTable& baseline) {
  if (method.weighting != baseline.weighting) {
    throw Error(ErrorCode::TableMismatch, "tables use different weightings");
  }
  if (ids_of(method.scores) != ids_of(baseline.scores)) {
    throw Error(ErrorCode::TableMismatch, "tables cover different disciplines");
  }
  Improvement out;
  out.avg = method.avg - baseline.avg;
  if (method.avg_hard && baseline.avg_hard) out.avg_hard = *method.avg_hard - *baseline.avg_hard;
  return out;
}

std::map<std::string, std::int64_t> delta_correct(const std::vector<DisciplineScore>& method,
                                                  const std::vector<DisciplineScore>& baseline) {
  std::map<std::string, const DisciplineScore*> base;
  for (const DisciplineScore& s : baseline) base[s.discipline_id] = &s;
  if (ids_of(method) != ids_of(baseline)) {
    throw Error(ErrorCode::TableMismatch, "score lists cover different disciplines");
  }
  std::map<std::string, std::int64_t> out;
  for (const DisciplineScore& s : method) {
    const DisciplineScore& b = *base.at(s.discipline_id);
    if (b.n_questions != s.n_questions) {
      throw Error(ErrorCode::TableMismatch, s.discipline_id + ": question counts differ");
    }
    out[s.discipline_id] =
        static_cast<std::int64_t>(s.n_correct) - static_cast<std::int64_t>(b.n_correct);
  }
  return out;
}

std::vector<ImprovementTable> normalized_relative_improvement(
    const std::vector<MethodDeltas>& methods, bool exclude_non_improving) {
  std::vector<ImprovementTable> out;
  if (methods.empty()) return out;

  std::set<std::string> shared;
  for (const auto& [id, _] : methods.front().delta_correct) shared.insert(id);
  for (const MethodDeltas& m : methods) {
    std::set<std::string> ids;
    for (const auto& [id, _] : m.delta_correct) ids.insert(id);
    if (ids != shared) throw Error(ErrorCode::TableMismatch, "methods cover different disciplines");
  }

  std::vector<std::string> kept, excluded;
  for (const std::string& id : shared) {
    const bool improved = std::any_of(methods.begin(), methods.end(), [&](const MethodDeltas& m) {
      return m.delta_correct.at(id) > 0;
    });
    (improved || !exclude_non_improving ? kept : excluded).push_back(id);
  }

  for (const MethodDeltas& m : methods) {
    ImprovementTable t;
    t.method_fingerprint = m.method_fingerprint;
    t.baseline_fingerprint = m.baseline_fingerprint;
    t.discipline_ids = kept;
    t.excluded = excluded;
    for (const std::string& id : kept) t.delta_correct.push_back(m.delta_correct.at(id));
    if (!t.delta_correct.empty()) {
      const auto [lo, hi] = std::minmax_element(t.delta_correct.begin(), t.delta_correct.end());
      const std::int64_t min = *lo, max = *hi;
      for (std::int64_t x : t.delta_correct) {
        t.normalized.push_back(max == min ? Ratio(0) : Ratio(cpp_int(x - min), cpp_int(max - min)));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::string metrics_csv_header() {
  return "Model,Lang.,STEM,Social Sci.,Human.,Others,Avg.,Avg. (Hard)";
}

std::string metrics_csv_row(const MetricsTable& t, std::string_view model,
                            std::string_view lang) {
  std::vector<std::string> fields = {std::string(model), std::string(lang)};
  for (Subdomain s : kSubdomains) {
    auto it = t.by_subdomain.find(s);
    fields.push_back(it == t.by_subdomain.end() ? "" : format_percent(it->second));
  }
  fields.push_back(format_percent(t.avg));
  fields.push_back(t.avg_hard ? format_percent(*t.avg_hard) : "");
  return csv::join(fields);
}

std::string discipline_scores_csv(const std::vector<DisciplineScore>& scores) {
  std::string out = "discipline_id,n_questions,n_correct,accuracy\n";
  for (const DisciplineScore& s : scores) {
    out += csv::join({s.discipline_id, std::to_string(s.n_questions),
                      std::to_string(s.n_correct), format_percent(s.accuracy())});
    out += '\n';
  }
  return out;
}

}  // namespace natlan
