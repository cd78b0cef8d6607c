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
#include "natlan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include "natlan/codec.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace natlan {

using nlohmann::json;

std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::direct: return "direct";
    case MethodKind::self_translation: return "self_translation";
    case MethodKind::nmt_first: return "nmt_first";
    case MethodKind::natlan: return "natlan";
  }
  return "direct";
}

std::optional<MethodKind> parse_method_kind(std::string_view s) {
  if (s == "direct") return MethodKind::direct;
  if (s == "self_translation") return MethodKind::self_translation;
  if (s == "nmt_first") return MethodKind::nmt_first;
  if (s == "natlan") return MethodKind::natlan;
  return std::nullopt;
}

// --- MethodSpec --------------------------------------------------------------

void MethodSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidRoleCombination, "method " + label() + ": " + why);
  };
  if (speaker.empty()) fail("speaker required");
  switch (kind) {
    case MethodKind::direct:
      if (transferor) fail("direct takes no transferor");
      break;
    case MethodKind::natlan:
    case MethodKind::nmt_first:
      if (!transferor || transferor->empty()) fail("transferor required");
      break;
    case MethodKind::self_translation:
      if (transferor && *transferor != speaker) {
        fail("self_translation uses the speaker as transferor");
      }
      break;
  }
  if (answer_decoding.max_tokens <= 0 || translation_decoding.max_tokens <= 0) {
    fail("max_tokens must be positive");
  }
}

MethodSpec MethodSpec::normalized() const {
  MethodSpec out = *this;
  if (out.kind == MethodKind::self_translation && !out.transferor) {
    out.transferor = out.speaker;
  }
  out.validate();
  return out;
}

const std::string& MethodSpec::transferor_id() const {
  if (kind == MethodKind::self_translation) return speaker;
  if (!transferor) {
    throw Error(ErrorCode::InvalidRoleCombination, "method " + label() + " has no transferor");
  }
  return *transferor;
}

json MethodSpec::behavior_json() const {
  json j = {{"kind", to_string(kind)},
            {"speaker", speaker},
            {"transferor", transferor ? json(*transferor) : json(nullptr)},
            {"shots", cfg.shots},
            {"template_version", cfg.template_version},
            {"discipline_name_style",
             cfg.discipline_name_style == NameStyle::english ? "english" : "target"},
            {"extraction", to_string(extraction)},
            {"answer_decoding", decoding_to_json(answer_decoding)},
            {"translation_decoding", decoding_to_json(translation_decoding)},
            {"nmt_segmentwise", nmt_segmentwise},
            {"back_translate", back_translate},
            {"target_language", target_language},
            {"native_language", native_language}};
  if (kind == MethodKind::self_translation) j["transferor"] = speaker;
  return j;
}

std::string MethodSpec::fingerprint() const { return sha256_hex(behavior_json().dump()); }

std::string MethodSpec::label() const {
  if (!name.empty()) return name;
  std::string out = std::string(to_string(kind)) + "-" + speaker;
  if ((kind == MethodKind::natlan || kind == MethodKind::nmt_first) && transferor) {
    out += "-" + *transferor;
  }
  return out;
}

namespace {

DecodingParams decoding_from_json(const json& j) {
  DecodingParams d;
  d.temperature = j.at("temperature").get<double>();
  d.max_tokens = j.at("max_tokens").get<int>();
  d.stop = j.value("stop", std::vector<std::string>{});
  return d;
}

}  // namespace

MethodSpec method_from_json(const json& j, std::string name) {
  try {
    MethodSpec m;
    m.name = std::move(name);
    const auto kind = parse_method_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::ParseError, "unknown method kind");
    m.kind = *kind;
    m.speaker = j.at("speaker").get<std::string>();
    if (!j.at("transferor").is_null() && m.kind != MethodKind::self_translation) {
      m.transferor = j["transferor"].get<std::string>();
    }
    m.cfg.shots = j.at("shots").get<std::size_t>();
    m.cfg.template_version = j.at("template_version").get<std::string>();
    m.cfg.discipline_name_style = j.at("discipline_name_style").get<std::string>() == "target"
                                      ? NameStyle::target
                                      : NameStyle::english;
    const auto extraction = parse_extraction_mode(j.at("extraction").get<std::string>());
    if (!extraction) throw Error(ErrorCode::ParseError, "unknown extraction mode");
    m.extraction = *extraction;
    m.answer_decoding = decoding_from_json(j.at("answer_decoding"));
    m.translation_decoding = decoding_from_json(j.at("translation_decoding"));
    m.nmt_segmentwise = j.at("nmt_segmentwise").get<bool>();
    m.back_translate = j.at("back_translate").get<bool>();
    m.target_language = j.at("target_language").get<std::string>();
    m.native_language = j.at("native_language").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("method description: ") + e.what());
  }
}

void check_roles(const MethodSpec& method,
                 const std::map<std::string, BackendKind, std::less<>>& kinds) {
  method.validate();
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidRoleCombination, "method " + method.label() + ": " + why);
  };
  auto kind_of = [&](const std::string& id, const char* role) {
    auto it = kinds.find(id);
    if (it == kinds.end()) {
      throw Error(ErrorCode::UnknownBackendRef,
                  "method " + method.label() + ": unknown " + role + " " + id);
    }
    return it->second;
  };
  if (kind_of(method.speaker, "speaker") == BackendKind::nmt_http) {
    fail("an NMT backend cannot be the speaker");
  }
  if (!method.uses_transfer()) return;
  const BackendKind tk = kind_of(method.transferor_id(), "transferor");
  if (method.kind == MethodKind::nmt_first && tk == BackendKind::chat_http) {
    fail("nmt_first needs an NMT transferor");
  }
  if (method.kind == MethodKind::natlan && tk == BackendKind::nmt_http) {
    fail("natlan needs a chat-model transferor");
  }
}

void check_roles(const MethodSpec& method, const BackendRegistry& backends) {
  check_roles(method, backends.kinds());
}

// --- TransferredQuestion / records ----------------------------------------

json to_json(const TransferredQuestion& t) {
  return {{"source_id", t.source_id},
          {"discipline_id", t.discipline_id},
          {"stem", t.stem},
          {"choices", t.choices},
          {"transferor_id", t.transferor_id},
          {"template_version", t.template_version},
          {"parse_ok", t.parse_ok},
          {"raw", t.raw}};
}

TransferredQuestion transferred_from_json(const json& j) {
  TransferredQuestion t;
  t.source_id = j.at("source_id").get<std::string>();
  t.discipline_id = j.value("discipline_id", std::string());
  t.stem = j.at("stem").get<std::string>();
  t.choices = j.at("choices").get<std::array<std::string, 4>>();
  t.transferor_id = j.at("transferor_id").get<std::string>();
  t.template_version = j.value("template_version", std::string());
  t.parse_ok = j.at("parse_ok").get<bool>();
  t.raw = j.value("raw", std::string());
  return t;
}

namespace {

json choice_json(const std::optional<Choice>& c) {
  return c ? json(std::string(1, to_char(*c))) : json(nullptr);
}

std::optional<Choice> choice_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  auto c = parse_choice(j.get<std::string>());
  if (!c) throw Error(ErrorCode::ParseError, "bad choice in record");
  return c;
}

}  // namespace

json to_json(const RunRecord& r) {
  json j = {{"discipline_id", r.discipline_id},
            {"question_id", r.question_id},
            {"method_fingerprint", r.method_fingerprint},
            {"transferred", r.transferred ? to_json(*r.transferred) : json(nullptr)},
            {"transfer_cache_hit", r.transfer_cache_hit},
            {"raw_answer", r.raw_answer},
            {"extracted", choice_json(r.extracted)},
            {"gold", choice_json(r.gold)},
            {"correct", r.correct ? json(*r.correct) : json(nullptr)},
            {"back_translation", r.back_translation ? json(*r.back_translation) : json(nullptr)},
            {"latency_ms",
             {{"transfer", r.latency.transfer_ms}, {"answer", r.latency.answer_ms}}},
            {"error", r.error ? json(*r.error) : json(nullptr)}};
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.discipline_id = j.at("discipline_id").get<std::string>();
  r.question_id = j.at("question_id").get<std::string>();
  r.method_fingerprint = j.value("method_fingerprint", std::string());
  if (j.contains("transferred") && !j["transferred"].is_null()) {
    r.transferred = transferred_from_json(j["transferred"]);
  }
  r.transfer_cache_hit = j.value("transfer_cache_hit", false);
  r.raw_answer = j.value("raw_answer", std::string());
  r.extracted = choice_from(j.value("extracted", json(nullptr)));
  r.gold = choice_from(j.value("gold", json(nullptr)));
  if (j.contains("correct") && !j["correct"].is_null()) r.correct = j["correct"].get<bool>();
  if (j.contains("back_translation") && !j["back_translation"].is_null()) {
    r.back_translation = j["back_translation"].get<std::string>();
  }
  if (j.contains("latency_ms")) {
    r.latency.transfer_ms = j["latency_ms"].value("transfer", std::int64_t{0});
    r.latency.answer_ms = j["latency_ms"].value("answer", std::int64_t{0});
  }
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  return r;
}

std::string records_to_jsonl(const std::vector<RunRecord>& records) {
  std::string out;
  for (const RunRecord& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<RunRecord> records_from_jsonl(std::string_view data) {
  std::vector<RunRecord> out;
  std::size_t line_no = 0;
  for (std::string_view line : text::split(data, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw LineError(ErrorCode::ParseError, line_no, "record is not JSON");
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const json::exception& e) {
      throw LineError(ErrorCode::ParseError, line_no, e.what());
    }
  }
  return out;
}

// --- reply parsing ---------------------------------------------------------

namespace {

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
  return s;
}

// "A." / "A．" / "A、" / "A)" / "A:" at line start; returns the rest.
std::optional<std::string_view> choice_marker(std::string_view line, char letter) {
  line = ltrim(line);
  if (line.empty() || line.front() != letter) return std::nullopt;
  line.remove_prefix(1);
  for (std::string_view sep : {".", ")", ":", "\xEF\xBC\x8E", "\xE3\x80\x81", "\xEF\xBC\x9A"}) {
    if (line.starts_with(sep)) {
      line.remove_prefix(sep.size());
      return ltrim(line);
    }
  }
  return std::nullopt;
}

std::string join_lines(const std::vector<std::string_view>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return std::string(text::trim(out));
}

}  // namespace

ParsedBlock parse_question_block(std::string_view reply) {
  std::vector<std::string_view> lines;
  for (std::string_view l : text::split(reply, '\n')) lines.push_back(strip_cr(l));

  // The choices begin after the last "Choices:" header when there is one.
  std::size_t choices_from = 0;
  std::optional<std::size_t> choices_header;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]) == "Choices:") choices_header = i;
  }
  if (choices_header) choices_from = *choices_header + 1;

  std::array<std::vector<std::string_view>, 4> choice_lines;
  std::optional<std::size_t> first_choice;
  int current = -1;
  for (std::size_t i = choices_from; i < lines.size(); ++i) {
    if (current < 3) {
      if (auto rest = choice_marker(lines[i], static_cast<char>('A' + current + 1))) {
        ++current;
        if (!first_choice) first_choice = i;
        choice_lines[static_cast<std::size_t>(current)].push_back(*rest);
        continue;
      }
    }
    if (current == 3 && ltrim(lines[i]).starts_with("Answer:")) break;
    if (current >= 0) choice_lines[static_cast<std::size_t>(current)].push_back(lines[i]);
  }

  ParsedBlock out;
  const std::size_t stem_end =
      choices_header ? *choices_header : first_choice.value_or(lines.size());
  std::vector<std::string_view> stem;
  for (std::size_t i = 0; i < stem_end; ++i) {
    std::string_view l = lines[i];
    if (stem.empty() && text::trim(l).empty()) continue;
    if (stem.empty() && ltrim(l).starts_with("Question:")) {
      l = ltrim(ltrim(l).substr(9));
      if (l.empty()) continue;
    }
    stem.push_back(l);
  }
  out.stem = join_lines(stem);
  for (std::size_t c = 0; c < 4; ++c) out.choices[c] = join_lines(choice_lines[c]);
  out.complete = current == 3 && !out.stem.empty() &&
                 std::all_of(out.choices.begin(), out.choices.end(),
                             [](const std::string& s) { return !s.empty(); });
  return out;
}

// --- TransferCache ---------------------------------------------------------

namespace {

constexpr std::size_t kDigestBytes = 32;

std::string hex_to_raw(const std::string& hex) {
  std::string raw;
  raw.reserve(hex.size() / 2);
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    raw.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return raw;
}

std::string raw_to_hex(std::string_view raw) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : raw) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0x0f]);
  }
  return out;
}

}  // namespace

TransferCache::TransferCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  const std::string data = text::read_file(path_);
  std::size_t pos = 0;
  while (pos + 4 <= data.size()) {
    std::uint32_t len = 0;
    for (int b = 3; b >= 0; --b) {
      len = (len << 8) | static_cast<unsigned char>(data[pos + static_cast<std::size_t>(b)]);
    }
    if (len < kDigestBytes || pos + 4 + len > data.size()) break;  // torn tail
    const std::string_view record(data.data() + pos + 4, len);
    const std::string key = raw_to_hex(record.substr(0, kDigestBytes));
    const json value = json::parse(record.substr(kDigestBytes), nullptr, false);
    if (value.is_discarded()) break;
    entries_[key] = transferred_from_json(value);
    pos += 4 + len;
  }
}

std::optional<TransferredQuestion> TransferCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TransferCache::store(const std::string& key, const TransferredQuestion& value) {
  std::lock_guard lock(mu_);
  entries_[key] = value;
  if (path_.empty()) return;
  const std::string payload = hex_to_raw(key) + to_json(value).dump();
  const auto len = static_cast<std::uint32_t>(payload.size());
  char header[4];
  for (int b = 0; b < 4; ++b) header[b] = static_cast<char>((len >> (8 * b)) & 0xff);
  const std::filesystem::path p(path_);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to cache " + path_);
  out.write(header, 4);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

std::size_t TransferCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string TransferCache::key_for(const Question& q, const MethodSpec& method) {
  const bool nmt = method.kind == MethodKind::nmt_first;
  json content = {{"stem", q.stem}, {"choices", q.choices}};
  json key = {{"transferor", method.transferor_id()},
              {"discipline", q.discipline_id},
              {"question_id", q.id},
              {"content", sha256_hex(content.dump())},
              {"source", method.target_language},
              {"target", method.native_language}};
  if (nmt) {
    key["route"] = method.nmt_segmentwise ? "nmt_segments" : "nmt_joint";
  } else {
    key["route"] = "chat";
    key["template_version"] = method.cfg.template_version;
    key["shots"] = method.cfg.shots;
    key["decoding"] = decoding_to_json(method.translation_decoding);
  }
  return sha256_hex(key.dump());
}

// --- stages ----------------------------------------------------------------

namespace {

std::string plain_block(const Question& q) {
  std::string out = q.stem;
  for (Choice c : kChoices) {
    out += "\n";
    out += to_char(c);
    out += ". ";
    out += q.choice(c);
  }
  return out;
}

TransferredQuestion from_reply(const Question& q, const std::string& transferor,
                               const std::string& template_version, std::string raw) {
  TransferredQuestion t;
  t.source_id = q.id;
  t.discipline_id = q.discipline_id;
  t.transferor_id = transferor;
  t.template_version = template_version;
  const ParsedBlock parsed = parse_question_block(raw);
  t.parse_ok = parsed.complete;
  if (parsed.complete) {
    t.stem = parsed.stem;
    t.choices = parsed.choices;
  } else {
    // Fallback: the raw reply stands in for the stem next to the original
    // choices.
    const std::string_view trimmed = text::trim(raw);
    t.stem = trimmed.empty() ? q.stem : std::string(trimmed);
    t.choices = q.choices;
  }
  t.raw = std::move(raw);
  return t;
}

}  // namespace

TransferResult transfer_question(const Question& q, const Discipline& discipline,
                                 const MethodSpec& method, Backend& transferor,
                                 TransferCache& cache, const TemplateSet& templates) {
  if (!method.uses_transfer()) {
    throw Error(ErrorCode::InvalidRoleCombination, "direct method has no transfer stage");
  }
  const std::string key = TransferCache::key_for(q, method);
  if (auto hit = cache.find(key)) return {*hit, true, 0};

  TransferResult out;
  if (method.kind == MethodKind::nmt_first) {
    if (method.nmt_segmentwise) {
      std::vector<std::string> segments = {q.stem};
      segments.insert(segments.end(), q.choices.begin(), q.choices.end());
      const std::vector<std::string> translated = transferor.translate_plain(
          segments, method.target_language, method.native_language);
      TransferredQuestion t;
      t.source_id = q.id;
      t.discipline_id = q.discipline_id;
      t.transferor_id = transferor.id();
      t.stem = translated[0];
      for (std::size_t c = 0; c < 4; ++c) t.choices[c] = translated[c + 1];
      t.parse_ok = true;
      json raw = translated;
      t.raw = raw.dump();
      out.question = std::move(t);
    } else {
      std::string reply = transferor.translate_plain(plain_block(q), method.target_language,
                                                     method.native_language);
      out.question = from_reply(q, transferor.id(), "", std::move(reply));
    }
  } else {
    const auto messages =
        build_translation_prompt(q, discipline.dev_examples, method.cfg, templates);
    ChatResponse r = transferor.complete(messages, method.translation_decoding);
    out.latency_ms = r.latency_ms;
    out.question = from_reply(q, transferor.id(), templates.version(), std::move(r.text));
  }
  cache.store(key, out.question);
  return out;
}

RunRecord answer_question(const Question& q,
                          const std::optional<TransferredQuestion>& transferred,
                          const Discipline& discipline, const MethodSpec& method,
                          Backend& speaker, const TemplateSet& templates) {
  RunRecord record;
  record.discipline_id = q.discipline_id;
  record.question_id = q.id;
  record.method_fingerprint = method.fingerprint();
  record.gold = q.gold;
  record.transferred = transferred;

  Question view = q;
  QaMode mode = QaMode::target;
  if (transferred) {
    view.stem = transferred->stem;
    view.choices = transferred->choices;
    view.language = Language::native;
    mode = QaMode::native;
  }
  const auto messages = build_qa_prompt(view, discipline, method.cfg, mode, templates);
  const ChatResponse r = speaker.complete(messages, method.answer_decoding);
  record.raw_answer = r.text;
  record.latency.answer_ms = r.latency_ms;
  record.extracted = extract_choice(r.text, method.extraction).choice;
  if (q.gold) record.correct = record.extracted == q.gold;
  return record;
}

// --- run orchestration -----------------------------------------------------

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const RunManifest& m) {
  return {{"method_label", m.method_label},
          {"method_fingerprint", m.method_fingerprint},
          {"method", m.method},
          {"template_version", m.template_version},
          {"template_digest", m.template_digest},
          {"split", to_string(m.split)},
          {"disciplines", m.disciplines},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"n_records", m.n_records},
          {"n_failed", m.n_failed},
          {"n_parse_failures", m.n_parse_failures},
          {"cache_hits", m.cache_hits},
          {"backend_calls", m.backend_calls}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.method_label = j.at("method_label").get<std::string>();
  m.method_fingerprint = j.at("method_fingerprint").get<std::string>();
  m.method = j.value("method", json::object());
  m.template_version = j.value("template_version", std::string());
  m.template_digest = j.value("template_digest", std::string());
  const auto split = parse_split(j.at("split").get<std::string>());
  if (!split) throw Error(ErrorCode::ParseError, "manifest has a bad split");
  m.split = *split;
  m.disciplines = j.value("disciplines", std::vector<std::string>{});
  m.started_at = j.value("started_at", std::string());
  m.finished_at = j.value("finished_at", std::string());
  m.n_records = j.value("n_records", std::size_t{0});
  m.n_failed = j.value("n_failed", std::size_t{0});
  m.n_parse_failures = j.value("n_parse_failures", std::size_t{0});
  m.cache_hits = j.value("cache_hits", std::size_t{0});
  m.backend_calls = j.value("backend_calls", std::map<std::string, std::size_t>{});
  return m;
}

namespace {

struct WorkItem {
  const Discipline* discipline;
  const Question* question;
};

std::vector<WorkItem> work_items(const DatasetBundle& bundle) {
  std::vector<WorkItem> items;
  for (const Discipline& d : bundle.disciplines) {
    auto it = bundle.questions.find(d.id);
    if (it == bundle.questions.end()) continue;
    for (const Question& q : it->second) items.push_back({&d, &q});
  }
  std::stable_sort(items.begin(), items.end(), [](const WorkItem& a, const WorkItem& b) {
    if (a.discipline->id != b.discipline->id) return a.discipline->id < b.discipline->id;
    return text::id_less(a.question->id, b.question->id);
  });
  return items;
}

// Shot availability is a configuration error, not a per-question failure.
void check_shots(const MethodSpec& method, const DatasetBundle& bundle) {
  for (const Discipline& d : bundle.disciplines) {
    if (d.dev_examples.size() < method.cfg.shots) {
      throw Error(ErrorCode::InsufficientShots,
                  d.id + ": " + std::to_string(method.cfg.shots) + " shots requested, " +
                      std::to_string(d.dev_examples.size()) + " dev examples");
    }
    if (!method.uses_transfer()) continue;
    for (std::size_t i = 0; i < method.cfg.shots; ++i) {
      if (!d.dev_examples[i].translated) {
        throw Error(ErrorCode::MissingTranslatedDev,
                    d.id + ": native-language methods need translated dev examples");
      }
    }
  }
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string describe(const std::exception& e) {
  if (auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(to_string(err->code())) + ": " + err->what();
  }
  return std::string("Internal: ") + e.what();
}

std::size_t resolve_workers(const RunOptions& options, const Backend& backend) {
  if (options.workers > 0) return options.workers;
  return static_cast<std::size_t>(backend.spec().max_in_flight);
}

}  // namespace

RunResult run_method(const MethodSpec& method_in, const DatasetBundle& bundle,
                     const BackendRegistry& backends, TransferCache& cache,
                     const RunOptions& options) {
  const MethodSpec method = method_in.normalized();
  check_roles(method, backends);
  check_shots(method, bundle);
  const TemplateSet templates =
      TemplateSet::resolve(options.templates_dir, method.cfg.template_version);

  Backend& speaker = backends.get(method.speaker);
  Backend* transferor = method.uses_transfer() ? &backends.get(method.transferor_id()) : nullptr;

  RunResult result;
  RunManifest& m = result.manifest;
  m.method_label = method.label();
  m.method_fingerprint = method.fingerprint();
  m.method = method.behavior_json();
  m.template_version = templates.version();
  m.template_digest = templates.digest();
  m.split = bundle.split;
  for (const Discipline& d : bundle.disciplines) m.disciplines.push_back(d.id);
  m.started_at = utc_timestamp();
  const auto calls_before = backends.call_counts();

  const std::vector<WorkItem> items = work_items(bundle);
  result.records.resize(items.size());

  parallel_for(items.size(), resolve_workers(options, speaker), [&](std::size_t i) {
    const Question& q = *items[i].question;
    const Discipline& d = *items[i].discipline;
    RunRecord& out = result.records[i];
    std::optional<TransferredQuestion> transferred;
    bool cache_hit = false;
    std::int64_t transfer_ms = 0;
    try {
      if (transferor) {
        TransferResult t = transfer_question(q, d, method, *transferor, cache, templates);
        transferred = std::move(t.question);
        cache_hit = t.cache_hit;
        transfer_ms = t.latency_ms;
      }
      out = answer_question(q, transferred, d, method, speaker, templates);
      if (method.back_translate && transferor && !text::trim(out.raw_answer).empty()) {
        if (transferor->spec().kind == BackendKind::nmt_http) {
          out.back_translation = transferor->translate_plain(
              out.raw_answer, method.native_language, method.target_language);
        } else {
          out.back_translation =
              transferor
                  ->complete(build_back_translation_prompt(out.raw_answer, templates),
                             method.translation_decoding)
                  .text;
        }
      }
    } catch (const std::exception& e) {
      out = RunRecord{};
      out.discipline_id = q.discipline_id;
      out.question_id = q.id;
      out.method_fingerprint = m.method_fingerprint;
      out.transferred = transferred;
      out.gold = q.gold;
      if (q.gold) out.correct = false;
      out.error = describe(e);
    }
    out.transfer_cache_hit = cache_hit;
    out.latency.transfer_ms = transfer_ms;
  });

  m.finished_at = utc_timestamp();
  const auto calls_after = backends.call_counts();
  for (const auto& [id, n] : calls_after) {
    const std::size_t delta = n - calls_before.at(id);
    if (id == method.speaker || (transferor && id == transferor->id()) || delta > 0) {
      m.backend_calls[id] = delta;
    }
  }
  m.n_records = result.records.size();
  for (const RunRecord& r : result.records) {
    if (r.error) ++m.n_failed;
    if (r.transferred && !r.transferred->parse_ok) ++m.n_parse_failures;
    if (r.transfer_cache_hit) ++m.cache_hits;
  }
  return result;
}

WarmResult warm_transfers(const MethodSpec& method_in, const DatasetBundle& bundle,
                          const BackendRegistry& backends, TransferCache& cache,
                          const RunOptions& options) {
  WarmResult out;
  const MethodSpec method = method_in.normalized();
  if (!method.uses_transfer()) return out;
  check_roles(method, backends);
  check_shots(method, bundle);
  const TemplateSet templates =
      TemplateSet::resolve(options.templates_dir, method.cfg.template_version);
  Backend& transferor = backends.get(method.transferor_id());

  const std::vector<WorkItem> items = work_items(bundle);
  std::atomic<std::size_t> transferred{0}, hits{0}, failed{0};
  parallel_for(items.size(), resolve_workers(options, transferor), [&](std::size_t i) {
    try {
      const TransferResult t = transfer_question(*items[i].question, *items[i].discipline,
                                                 method, transferor, cache, templates);
      (t.cache_hit ? hits : transferred)++;
    } catch (const Error&) {
      ++failed;
    }
  });
  out.transferred = transferred;
  out.cache_hits = hits;
  out.failed = failed;
  return out;
}

}  // namespace natlan
