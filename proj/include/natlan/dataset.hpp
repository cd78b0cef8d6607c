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

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace natlan {

enum class Choice { A, B, C, D };

inline constexpr std::array<Choice, 4> kChoices = {Choice::A, Choice::B,
                                                   Choice::C, Choice::D};

inline char to_char(Choice c) { return static_cast<char>('A' + static_cast<int>(c)); }
inline std::size_t index_of(Choice c) { return static_cast<std::size_t>(c); }

/// Exactly "A".."D"; anything else (including lowercase) is rejected.
std::optional<Choice> parse_choice(std::string_view s);

enum class Subdomain { STEM, SocialSci, Humanities, Others };

inline constexpr std::array<Subdomain, 4> kSubdomains = {
    Subdomain::STEM, Subdomain::SocialSci, Subdomain::Humanities,
    Subdomain::Others};

std::string_view to_string(Subdomain s);
std::optional<Subdomain> parse_subdomain(std::string_view s);

enum class Split { dev, val, test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

enum class Language { target, native };

struct Question {
  std::string id;
  std::string discipline_id;
  std::string stem;
  std::array<std::string, 4> choices;
  std::optional<Choice> gold;
  Language language = Language::target;

  const std::string& choice(Choice c) const { return choices[index_of(c)]; }
  bool operator==(const Question&) const = default;
};

/// A dev shot: the original question and, when available, its
/// native-language rendering carrying the same gold label.
struct DevExample {
  Question original;
  std::optional<Question> translated;

  bool operator==(const DevExample&) const = default;
};

struct Discipline {
  std::string id;
  std::string name_en;
  std::string name_target;
  Subdomain subdomain = Subdomain::Others;
  bool is_hard = false;
  std::vector<DevExample> dev_examples;

  bool has_translated_dev() const;
  bool operator==(const Discipline&) const = default;
};

/// Reads the tab-separated registry. Header:
///   id  name_en  name_target  subdomain  is_hard
/// Lines starting with '#' are comments. Result is sorted by id.
std::vector<Discipline> load_discipline_registry(const std::string& path);

/// Path of a split file in the C-Eval layout: {root}/{split}/{id}_{split}.csv
std::string split_path(const std::string& root, std::string_view discipline_id,
                       Split split);

/// Rows of {root}/{split}/{id}_{split}.csv in file order.
std::vector<Question> load_split(const Discipline& discipline, Split split,
                                 const std::string& root);

/// Same as load_split but from an explicit file.
std::vector<Question> load_split_file(const Discipline& discipline, Split split,
                                      const std::string& path);

/// Pairs each original dev question with its translation from \p path
/// (split schema plus a source_id column). Output follows the order of
/// \p originals.
std::vector<DevExample> load_translated_dev(const Discipline& discipline,
                                            const std::vector<Question>& originals,
                                            const std::string& path);

struct BundleOptions {
  std::string root;
  std::string registry;
  std::string translated_dev_dir = "dev_translated";  // relative to root
  Split split = Split::val;
  std::size_t shots = 5;
  std::vector<std::string> only;  // empty: every registered discipline

  bool operator==(const BundleOptions&) const = default;
};

/// Immutable after loading; safe to share across threads.
struct DatasetBundle {
  std::vector<Discipline> disciplines;
  Split split = Split::val;
  std::map<std::string, std::vector<Question>> questions;

  const Discipline& discipline(std::string_view id) const;
  const Discipline* find(std::string_view id) const;
  std::size_t question_count() const;
};

/// Loads the registry, dev shots (with translations when the translated
/// file exists) and the requested split for the selected disciplines.
DatasetBundle load_bundle(const BundleOptions& options);

struct ValidationIssue {
  enum class Severity { warning, error };
  Severity severity = Severity::error;
  std::string discipline_id;
  std::string message;
};

struct ValidationReport {
  std::size_t disciplines = 0;
  std::map<Split, std::size_t> question_counts;
  std::vector<ValidationIssue> issues;

  bool ok() const;
};

/// Loads every split of every selected discipline and reports problems
/// instead of throwing: dev size != shots, overlapping ids across splits,
/// missing or inconsistent translated dev files.
ValidationReport validate_dataset(const BundleOptions& options);

}  // namespace natlan
