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
#include "natlan/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <unordered_map>

#include "natlan/csv.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace fs = std::filesystem;

namespace natlan {

std::optional<Choice> parse_choice(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  if (s[0] < 'A' || s[0] > 'D') return std::nullopt;
  return static_cast<Choice>(s[0] - 'A');
}

std::string_view to_string(Subdomain s) {
  switch (s) {
    case Subdomain::STEM: return "STEM";
    case Subdomain::SocialSci: return "SocialSci";
    case Subdomain::Humanities: return "Humanities";
    case Subdomain::Others: return "Others";
  }
  return "Others";
}

std::optional<Subdomain> parse_subdomain(std::string_view s) {
  for (Subdomain d : kSubdomains) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::dev: return "dev";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "val";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "dev") return Split::dev;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

bool Discipline::has_translated_dev() const {
  return !dev_examples.empty() &&
         std::all_of(dev_examples.begin(), dev_examples.end(),
                     [](const DevExample& e) { return e.translated.has_value(); });
}

namespace {

std::optional<bool> parse_flag(std::string_view s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no" || s.empty()) return false;
  return std::nullopt;
}

struct Columns {
  std::unordered_map<std::string, std::size_t> index;

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

Columns header_columns(const csv::Row& header) {
  Columns cols;
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    cols.index.emplace(std::string(text::trim(header.fields[i])), i);
  }
  return cols;
}

std::string field_text(const csv::Row& row, std::size_t i) {
  return std::string(text::trim_line_breaks(row.fields[i]));
}

struct QuestionColumns {
  std::size_t id;
  std::size_t question;
  std::array<std::size_t, 4> choices;
  std::optional<std::size_t> answer;
};

QuestionColumns question_columns(const Columns& cols, const std::string& id_column,
                                 const std::string& path) {
  auto require = [&](const std::string& name) {
    auto i = cols.find(name);
    if (!i) {
      throw LineError(ErrorCode::RowParseError, 1,
                      path + ": missing column '" + name + "'");
    }
    return *i;
  };
  QuestionColumns qc{};
  qc.id = require(id_column);
  qc.question = require("question");
  qc.choices = {require("A"), require("B"), require("C"), require("D")};
  qc.answer = cols.find("answer");
  return qc;
}

std::vector<Question> parse_questions(const std::string& data,
                                      const std::string& path,
                                      const std::string& discipline_id,
                                      const std::string& id_column,
                                      bool gold_required, Split split,
                                      Language language) {
  const std::vector<csv::Row> rows = csv::parse(data);
  if (rows.empty()) {
    throw LineError(ErrorCode::RowParseError, 1, path + ": missing header");
  }
  const QuestionColumns qc =
      question_columns(header_columns(rows.front()), id_column, path);
  const std::size_t width = rows.front().fields.size();

  std::vector<Question> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    if (row.fields.size() != width) {
      throw LineError(ErrorCode::RowParseError, row.line,
                      path + ": expected " + std::to_string(width) +
                          " fields, found " + std::to_string(row.fields.size()));
    }
    Question q;
    q.id = std::string(text::trim(row.fields[qc.id]));
    if (q.id.empty()) {
      throw LineError(ErrorCode::RowParseError, row.line, path + ": empty id");
    }
    q.discipline_id = discipline_id;
    q.stem = field_text(row, qc.question);
    for (std::size_t c = 0; c < 4; ++c) q.choices[c] = field_text(row, qc.choices[c]);
    q.language = language;

    const std::string_view answer =
        qc.answer ? text::trim(row.fields[*qc.answer]) : std::string_view{};
    if (!answer.empty()) {
      q.gold = parse_choice(answer);
      if (!q.gold) {
        throw LineError(ErrorCode::RowParseError, row.line,
                        path + ": answer '" + std::string(answer) +
                            "' is not one of A-D");
      }
    } else if (gold_required) {
      throw LineError(ErrorCode::MissingGoldLabel, row.line,
                      path + ": " + std::string(to_string(split)) +
                          " row without answer");
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

std::vector<Discipline> load_discipline_registry(const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingFile, "registry not found: " + path);
  }
  const std::string data = text::read_file(path);
  std::vector<Discipline> out;
  std::set<std::string> seen;
  std::optional<Columns> cols;

  std::size_t line_no = 0;
  for (std::string_view line : text::split(data, '\n')) {
    ++line_no;
    line = text::trim_line_breaks(line);
    if (text::trim(line).empty() || line.starts_with('#')) continue;
    const auto fields = text::split(line, '\t');
    if (!cols) {
      csv::Row header;
      for (auto f : fields) header.fields.emplace_back(f);
      cols = header_columns(header);
      for (const char* name : {"id", "name_en", "name_target", "subdomain", "is_hard"}) {
        if (!cols->find(name)) {
          throw LineError(ErrorCode::ParseError, line_no,
                          path + ": registry header lacks '" + name + "'");
        }
      }
      continue;
    }
    auto get = [&](const char* name) -> std::string {
      const std::size_t i = *cols->find(name);
      if (i >= fields.size()) {
        throw LineError(ErrorCode::ParseError, line_no,
                        path + ": missing field '" + name + "'");
      }
      return std::string(text::trim(fields[i]));
    };
    Discipline d;
    d.id = get("id");
    d.name_en = get("name_en");
    d.name_target = get("name_target");
    const std::string sub = get("subdomain");
    const auto subdomain = parse_subdomain(sub);
    if (!subdomain) {
      throw LineError(ErrorCode::UnknownSubdomain, line_no,
                      path + ": unknown subdomain '" + sub + "'");
    }
    d.subdomain = *subdomain;
    const auto hard = parse_flag(get("is_hard"));
    if (!hard) {
      throw LineError(ErrorCode::ParseError, line_no,
                      path + ": is_hard must be true/false");
    }
    d.is_hard = *hard;
    if (d.id.empty()) {
      throw LineError(ErrorCode::ParseError, line_no, path + ": empty id");
    }
    if (!seen.insert(d.id).second) {
      throw LineError(ErrorCode::DuplicateDisciplineId, line_no,
                      path + ": duplicate discipline id '" + d.id + "'");
    }
    out.push_back(std::move(d));
  }
  if (out.empty()) {
    throw Error(ErrorCode::MissingDisciplines, path + ": no disciplines");
  }
  std::sort(out.begin(), out.end(),
            [](const Discipline& a, const Discipline& b) { return a.id < b.id; });
  return out;
}

std::string split_path(const std::string& root, std::string_view discipline_id,
                       Split split) {
  const std::string name =
      std::string(discipline_id) + "_" + std::string(to_string(split)) + ".csv";
  return (fs::path(root) / std::string(to_string(split)) / name).string();
}

std::vector<Question> load_split_file(const Discipline& discipline, Split split,
                                      const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingFile, "split file not found: " + path);
  }
  return parse_questions(text::read_file(path), path, discipline.id, "id",
                         split != Split::test, split, Language::target);
}

std::vector<Question> load_split(const Discipline& discipline, Split split,
                                 const std::string& root) {
  return load_split_file(discipline, split, split_path(root, discipline.id, split));
}

std::vector<DevExample> load_translated_dev(const Discipline& discipline,
                                            const std::vector<Question>& originals,
                                            const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingFile, "translated dev not found: " + path);
  }
  std::vector<Question> translated =
      parse_questions(text::read_file(path), path, discipline.id, "source_id",
                      true, Split::dev, Language::native);
  if (translated.size() != originals.size()) {
    throw Error(ErrorCode::CountMismatch,
                path + ": " + std::to_string(translated.size()) +
                    " translations for " + std::to_string(originals.size()) +
                    " dev questions");
  }
  std::unordered_map<std::string, Question*> by_id;
  for (Question& t : translated) {
    if (!by_id.emplace(t.id, &t).second) {
      throw Error(ErrorCode::IdMismatch, path + ": duplicate source_id " + t.id);
    }
  }
  std::vector<DevExample> out;
  out.reserve(originals.size());
  for (const Question& original : originals) {
    auto it = by_id.find(original.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::IdMismatch,
                  path + ": no translation for dev id " + original.id);
    }
    const Question& t = *it->second;
    if (t.gold != original.gold) {
      throw Error(ErrorCode::GoldMismatch,
                  path + ": gold label differs for dev id " + original.id);
    }
    out.push_back(DevExample{original, t});
  }
  return out;
}

const Discipline* DatasetBundle::find(std::string_view id) const {
  for (const Discipline& d : disciplines) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const Discipline& DatasetBundle::discipline(std::string_view id) const {
  if (const Discipline* d = find(id)) return *d;
  throw Error(ErrorCode::UnknownDiscipline,
              "discipline not in bundle: " + std::string(id));
}

std::size_t DatasetBundle::question_count() const {
  std::size_t n = 0;
  for (const auto& [id, qs] : questions) n += qs.size();
  return n;
}

namespace {

std::vector<Discipline> select(std::vector<Discipline> all,
                               const std::vector<std::string>& only) {
  if (only.empty()) return all;
  std::vector<Discipline> out;
  for (const std::string& id : only) {
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const Discipline& d) { return d.id == id; });
    if (it == all.end()) {
      throw Error(ErrorCode::UnknownDiscipline, "unknown discipline: " + id);
    }
    out.push_back(*it);
  }
  std::sort(out.begin(), out.end(),
            [](const Discipline& a, const Discipline& b) { return a.id < b.id; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Discipline& a, const Discipline& b) {
                          return a.id == b.id;
                        }),
            out.end());
  return out;
}

std::string translated_path(const BundleOptions& options, const std::string& id) {
  return (fs::path(options.root) / options.translated_dev_dir / (id + "_dev.csv"))
      .string();
}

void attach_dev(Discipline& d, const BundleOptions& options) {
  const std::vector<Question> dev = load_split(d, Split::dev, options.root);
  const std::string tpath = translated_path(options, d.id);
  if (fs::exists(tpath)) {
    d.dev_examples = load_translated_dev(d, dev, tpath);
  } else {
    d.dev_examples.clear();
    for (const Question& q : dev) d.dev_examples.push_back(DevExample{q, std::nullopt});
  }
}

}  // namespace

DatasetBundle load_bundle(const BundleOptions& options) {
  DatasetBundle bundle;
  bundle.split = options.split;
  bundle.disciplines = select(load_discipline_registry(options.registry), options.only);
  for (Discipline& d : bundle.disciplines) {
    attach_dev(d, options);
    bundle.questions[d.id] = load_split(d, options.split, options.root);
  }
  return bundle;
}

bool ValidationReport::ok() const {
  return std::none_of(issues.begin(), issues.end(), [](const ValidationIssue& i) {
    return i.severity == ValidationIssue::Severity::error;
  });
}

ValidationReport validate_dataset(const BundleOptions& options) {
  using Severity = ValidationIssue::Severity;
  ValidationReport report;
  std::vector<Discipline> disciplines;
  try {
    disciplines = select(load_discipline_registry(options.registry), options.only);
  } catch (const Error& e) {
    report.issues.push_back({Severity::error, "", std::string(to_string(e.code())) +
                                                      ": " + e.what()});
    return report;
  }
  report.disciplines = disciplines.size();

  for (const Discipline& d : disciplines) {
    auto issue = [&](Severity s, std::string message) {
      report.issues.push_back({s, d.id, std::move(message)});
    };
    std::map<Split, std::set<std::string>> ids;
    std::vector<Question> dev;
    for (Split split : {Split::dev, Split::val, Split::test}) {
      const std::string path = split_path(options.root, d.id, split);
      if (!fs::exists(path)) {
        // Only dev and the configured split are mandatory.
        if (split == Split::dev || split == options.split) {
          issue(Severity::error, "missing " + std::string(to_string(split)) +
                                     " split: " + path);
        }
        continue;
      }
      try {
        std::vector<Question> qs = load_split_file(d, split, path);
        report.question_counts[split] += qs.size();
        for (const Question& q : qs) ids[split].insert(q.id);
        if (split == Split::dev) dev = std::move(qs);
      } catch (const Error& e) {
        issue(Severity::error, std::string(to_string(e.code())) + ": " + e.what());
      }
    }
    if (ids.count(Split::dev) && dev.size() != options.shots) {
      issue(Severity::error, "dev split has " + std::to_string(dev.size()) +
                                 " questions, expected " +
                                 std::to_string(options.shots));
    }
    const std::array<std::pair<Split, Split>, 3> pairs = {
        std::pair{Split::dev, Split::val}, std::pair{Split::dev, Split::test},
        std::pair{Split::val, Split::test}};
    for (const auto& [a, b] : pairs) {
      std::size_t shared = 0;
      for (const std::string& id : ids[a]) shared += ids[b].count(id);
      if (shared > 0) {
        issue(Severity::warning,
              std::to_string(shared) + " ids shared between " +
                  std::string(to_string(a)) + " and " + std::string(to_string(b)));
      }
    }
    const std::string tpath = translated_path(options, d.id);
    if (!fs::exists(tpath)) {
      issue(Severity::warning, "no translated dev file (native-mode methods unavailable)");
    } else if (!dev.empty()) {
      try {
        load_translated_dev(d, dev, tpath);
      } catch (const Error& e) {
        issue(Severity::error, std::string(to_string(e.code())) + ": " + e.what());
      }
    }
  }
  return report;
}

}  // namespace natlan
