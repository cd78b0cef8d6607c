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
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "natlan/backend.hpp"
#include "natlan/dataset.hpp"
#include "natlan/extract.hpp"
#include "natlan/promptkit.hpp"

namespace natlan {

enum class MethodKind { direct, self_translation, nmt_first, natlan };

std::string_view to_string(MethodKind k);
std::optional<MethodKind> parse_method_kind(std::string_view s);

struct MethodSpec {
  std::string name;  // display label only; not behavior-relevant
  MethodKind kind = MethodKind::direct;
  std::string speaker;
  std::optional<std::string> transferor;
  PromptConfig cfg;
  ExtractionMode extraction = ExtractionMode::strict;
  DecodingParams answer_decoding{0.0, 8, {}};
  DecodingParams translation_decoding{0.0, 512, {}};
  bool nmt_segmentwise = true;
  bool back_translate = false;
  std::string target_language = "zh";
  std::string native_language = "en";
  bool from_matrix = false;  // config bookkeeping

  /// Enforces the role laws: direct has no transferor; natlan and nmt_first
  /// need one; self_translation uses the speaker for both roles (a distinct
  /// transferor is rejected). Throws Error(InvalidRoleCombination).
  void validate() const;

  /// Copy with self_translation's transferor filled in, then validated.
  MethodSpec normalized() const;

  /// Transferor id for transfer methods (speaker for self_translation).
  const std::string& transferor_id() const;

  bool uses_transfer() const { return kind != MethodKind::direct; }

  /// SHA-256 over every behavior-relevant field (not the name).
  std::string fingerprint() const;
  nlohmann::json behavior_json() const;

  /// name, or kind-speaker[-transferor] when unnamed.
  std::string label() const;

  bool operator==(const MethodSpec&) const = default;
};

/// Inverse of MethodSpec::behavior_json; \p name is restored separately.
MethodSpec method_from_json(const nlohmann::json& behavior, std::string name = {});

/// Checks backend ids resolve and have kinds that fit their roles: an NMT
/// backend can only be an nmt_first transferor and natlan needs a chat
/// transferor. Mock backends fit any role.
void check_roles(const MethodSpec& method, const BackendRegistry& backends);
void check_roles(const MethodSpec& method,
                 const std::map<std::string, BackendKind, std::less<>>& kinds);

struct TransferredQuestion {
  std::string source_id;
  std::string discipline_id;
  std::string stem;
  std::array<std::string, 4> choices;
  std::string transferor_id;
  std::string template_version;
  bool parse_ok = false;
  std::string raw;

  bool operator==(const TransferredQuestion&) const = default;
};

nlohmann::json to_json(const TransferredQuestion& t);
TransferredQuestion transferred_from_json(const nlohmann::json& j);

struct ParsedBlock {
  std::string stem;
  std::array<std::string, 4> choices;
  bool complete = false;  // stem and all four choices found and non-empty
};

/// Reads a Question:/Choices:/A. ../Answer: block back into its parts.
/// Tolerates a missing "Question:" or "Choices:" header and multi-line
/// stems and choices.
ParsedBlock parse_question_block(std::string_view reply);

/// Thread-safe transfer cache, optionally persisted as an append-only file
/// of length-prefixed records:
///   u32 little-endian payload length | 32-byte key digest | JSON value
/// A truncated trailing record is ignored on load. Identical keys resolve
/// last-writer-wins.
class TransferCache {
 public:
  TransferCache() = default;
  explicit TransferCache(std::string path);

  std::optional<TransferredQuestion> find(const std::string& key) const;
  void store(const std::string& key, const TransferredQuestion& value);
  std::size_t size() const;
  const std::string& path() const { return path_; }

  /// Hex key over (transferor, template version, route, prompt settings,
  /// discipline, question id, question content).
  static std::string key_for(const Question& q, const MethodSpec& method);

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, TransferredQuestion> entries_;
};

struct TransferResult {
  TransferredQuestion question;
  bool cache_hit = false;
  std::int64_t latency_ms = 0;
};

/// Semantic transfer of \p q into the native language. natlan and
/// self_translation prompt the transferor with the few-shot translation
/// prompt; nmt_first sends stem and choices to translate_plain. A reply that
/// does not parse yields parse_ok = false with the raw text kept. A cache
/// hit makes no backend call.
TransferResult transfer_question(const Question& q, const Discipline& discipline,
                                 const MethodSpec& method, Backend& transferor,
                                 TransferCache& cache,
                                 const TemplateSet& templates = TemplateSet::builtin());

struct StageLatency {
  std::int64_t transfer_ms = 0;
  std::int64_t answer_ms = 0;

  bool operator==(const StageLatency&) const = default;
};

struct RunRecord {
  std::string discipline_id;
  std::string question_id;
  std::string method_fingerprint;
  std::optional<TransferredQuestion> transferred;
  bool transfer_cache_hit = false;
  std::string raw_answer;
  std::optional<Choice> extracted;
  std::optional<Choice> gold;
  std::optional<bool> correct;  // present iff gold is known
  std::optional<std::string> back_translation;
  StageLatency latency;
  std::optional<std::string> error;  // set on failed records

  bool operator==(const RunRecord&) const = default;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// The speaker stage: Q&A prompt in native mode for transferred questions
/// (a parse failure shows the raw reply as the stem with the original
/// choices), target mode otherwise; greedy decoding; extraction per the
/// method's mode. Backend errors propagate.
RunRecord answer_question(const Question& q,
                          const std::optional<TransferredQuestion>& transferred,
                          const Discipline& discipline, const MethodSpec& method,
                          Backend& speaker,
                          const TemplateSet& templates = TemplateSet::builtin());

struct RunOptions {
  std::size_t workers = 0;  // 0: the speaker's max_in_flight
  std::string templates_dir;
};

struct RunManifest {
  std::string method_label;
  std::string method_fingerprint;
  nlohmann::json method;
  std::string template_version;
  std::string template_digest;
  Split split = Split::val;
  std::vector<std::string> disciplines;
  std::string started_at;
  std::string finished_at;
  std::size_t n_records = 0;
  std::size_t n_failed = 0;
  std::size_t n_parse_failures = 0;
  std::size_t cache_hits = 0;
  std::map<std::string, std::size_t> backend_calls;  // made during this run
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

struct RunResult {
  RunManifest manifest;
  std::vector<RunRecord> records;  // sorted by (discipline_id, question_id)
};

/// Runs \p method over every question of the bundle. Configuration errors
/// throw before any request; per-question failures become failed records.
/// Questions run concurrently up to the worker count; output order does
/// not depend on completion order.
RunResult run_method(const MethodSpec& method, const DatasetBundle& bundle,
                     const BackendRegistry& backends, TransferCache& cache,
                     const RunOptions& options = {});

struct WarmResult {
  std::size_t transferred = 0;
  std::size_t cache_hits = 0;
  std::size_t failed = 0;
};

/// Transfer stage only, filling \p cache. No-op for direct methods.
WarmResult warm_transfers(const MethodSpec& method, const DatasetBundle& bundle,
                          const BackendRegistry& backends, TransferCache& cache,
                          const RunOptions& options = {});

/// One JSON object per line.
std::string records_to_jsonl(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_jsonl(std::string_view data);

/// UTC ISO-8601; honours SOURCE_DATE_EPOCH for reproducible artifacts.
std::string utc_timestamp();

}  // namespace natlan
