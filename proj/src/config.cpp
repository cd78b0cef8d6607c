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
#include "natlan/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace natlan {

namespace fs = std::filesystem;

namespace {

std::size_t line_of(const toml::node& n) { return n.source().begin.line; }

[[noreturn]] void fail_at(const toml::node& n, const std::string& msg,
                          ErrorCode code = ErrorCode::ParseError) {
  const std::size_t line = line_of(n);
  if (line > 0) throw LineError(code, line, msg);
  throw Error(code, msg);
}

bool looks_secret(std::string_view key) {
  for (std::string_view s : {"api_key", "apikey", "token", "password", "secret"}) {
    if (key.find(s) != std::string_view::npos) return true;
  }
  return false;
}

// Typed access to one TOML table with strict key checking.
class Reader {
 public:
  Reader(const toml::table& t, std::string where) : t_(t), where_(std::move(where)) {}

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, node] : t_) {
      const std::string_view k = key.str();
      if (std::find(keys.begin(), keys.end(), k) != keys.end()) continue;
      if (looks_secret(k)) {
        fail_at(node, where_ + "." + std::string(k) +
                          ": secrets are not allowed inline; name an environment variable in 'auth'");
      }
      fail_at(node, "unknown key " + where_ + "." + std::string(k));
    }
  }

  const toml::node* node(std::string_view key) const { return t_.get(key); }

  std::optional<std::string> str(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) fail_at(*n, where_ + "." + std::string(key) + " must be a string");
    return n->value<std::string>();
  }

  std::optional<std::int64_t> integer(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) fail_at(*n, where_ + "." + std::string(key) + " must be an integer");
    return n->value<std::int64_t>();
  }

  std::optional<double> real(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_number()) fail_at(*n, where_ + "." + std::string(key) + " must be a number");
    return n->value<double>();
  }

  std::optional<bool> boolean(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_boolean()) fail_at(*n, where_ + "." + std::string(key) + " must be a boolean");
    return n->value<bool>();
  }

  std::optional<std::vector<std::string>> strings(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) fail_at(*n, where_ + "." + std::string(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const toml::node& el : *arr) {
      if (!el.is_string()) fail_at(el, where_ + "." + std::string(key) + " must hold strings");
      out.push_back(*el.value<std::string>());
    }
    return out;
  }

  const toml::table* table(std::string_view key) const {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail_at(*n, where_ + "." + std::string(key) + " must be a table");
    return n->as_table();
  }

  int small_int(std::string_view key, int fallback, int min) const {
    const auto v = integer(key);
    if (!v) return fallback;
    if (*v < min || *v > 100000000) {
      fail_at(*node(key), where_ + "." + std::string(key) + " is out of range");
    }
    return static_cast<int>(*v);
  }

  const toml::table& raw() const { return t_; }
  const std::string& where() const { return where_; }

 private:
  const toml::table& t_;
  std::string where_;
};

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = fs::path(base) / path;
  return path.lexically_normal().string();
}

template <class T, class Parse>
T parse_enum(const Reader& r, std::string_view key, T fallback, Parse parse) {
  const auto s = r.str(key);
  if (!s) return fallback;
  const auto v = parse(*s);
  if (!v) fail_at(*r.node(key), "unknown value '" + *s + "' for " + r.where() + "." + std::string(key));
  return *v;
}

std::optional<NameStyle> parse_name_style(std::string_view s) {
  if (s == "english") return NameStyle::english;
  if (s == "target") return NameStyle::target;
  return std::nullopt;
}

std::string_view to_string(NameStyle s) { return s == NameStyle::english ? "english" : "target"; }

DecodingParams read_decoding(const Reader& parent, std::string_view key, DecodingParams d) {
  const toml::table* t = parent.table(key);
  if (!t) return d;
  Reader r(*t, parent.where() + "." + std::string(key));
  r.allow({"temperature", "max_tokens", "stop"});
  if (auto v = r.real("temperature")) d.temperature = *v;
  d.max_tokens = r.small_int("max_tokens", d.max_tokens, 1);
  if (auto v = r.strings("stop")) d.stop = *v;
  return d;
}

// Fields a method may override; shared by [run]/[decoding] defaults and
// [[methods]] entries.
void read_method_settings(const Reader& r, MethodSpec& m) {
  const auto shots = r.integer("shots");
  if (shots) {
    if (*shots < 0) fail_at(*r.node("shots"), "shots must be >= 0");
    m.cfg.shots = static_cast<std::size_t>(*shots);
  }
  if (auto v = r.str("template_version")) m.cfg.template_version = *v;
  m.cfg.discipline_name_style =
      parse_enum(r, "discipline_name_style", m.cfg.discipline_name_style, parse_name_style);
  m.extraction = parse_enum(r, "extraction", m.extraction, parse_extraction_mode);
  if (auto v = r.boolean("nmt_segmentwise")) m.nmt_segmentwise = *v;
  if (auto v = r.boolean("back_translate")) m.back_translate = *v;
  if (auto v = r.str("target_language")) m.target_language = *v;
  if (auto v = r.str("native_language")) m.native_language = *v;
  m.answer_decoding = read_decoding(r, "answer_decoding", m.answer_decoding);
  m.translation_decoding = read_decoding(r, "translation_decoding", m.translation_decoding);
}

#define NATLAN_METHOD_KEYS                                                                   \
  "shots", "template_version", "discipline_name_style", "extraction", "nmt_segmentwise",    \
      "back_translate", "target_language", "native_language", "answer_decoding",            \
      "translation_decoding"

BackendSpec read_backend(const Reader& r, const std::string& base) {
  r.allow({"id", "kind", "endpoint", "model", "auth", "max_in_flight", "timeout_ms", "retry",
           "script"});
  BackendSpec b;
  const auto id = r.str("id");
  if (!id || id->empty()) fail_at(r.raw(), r.where() + ": backend id is required");
  b.id = *id;
  if (!r.node("kind")) fail_at(r.raw(), "backend " + b.id + ": kind is required");
  b.kind = parse_enum(r, "kind", b.kind, parse_backend_kind);
  b.endpoint = r.str("endpoint").value_or("");
  b.model_name = r.str("model").value_or("");
  b.auth = r.str("auth").value_or("");
  b.max_in_flight = r.small_int("max_in_flight", b.max_in_flight, 1);
  b.timeout_ms = r.small_int("timeout_ms", b.timeout_ms, 1);
  if (const toml::table* t = r.table("retry")) {
    Reader rr(*t, r.where() + ".retry");
    rr.allow({"attempts", "backoff_ms"});
    b.retry.attempts = rr.small_int("attempts", b.retry.attempts, 1);
    b.retry.backoff_ms = rr.small_int("backoff_ms", b.retry.backoff_ms, 0);
  }
  b.script = resolve(base, r.str("script").value_or(""));
  try {
    b.validate();
  } catch (const Error& e) {
    fail_at(r.raw(), "backend " + b.id + ": " + e.what());
  }
  return b;
}

MethodSpec read_method(const Reader& r, const MethodSpec& defaults) {
  r.allow({"name", "kind", "speaker", "transferor", NATLAN_METHOD_KEYS});
  MethodSpec m = defaults;
  m.name = r.str("name").value_or("");
  if (!r.node("kind")) fail_at(r.raw(), r.where() + ": method kind is required");
  m.kind = parse_enum(r, "kind", m.kind, parse_method_kind);
  m.speaker = r.str("speaker").value_or("");
  m.transferor = r.str("transferor");
  read_method_settings(r, m);
  return m;
}

void check_method(const MethodSpec& m, const std::map<std::string, BackendKind, std::less<>>& kinds,
                  const toml::node& where) {
  try {
    check_roles(m, kinds);
  } catch (const Error& e) {
    fail_at(where, e.what(), e.code());
  }
}

std::vector<MethodSpec> expand_matrix(const MatrixSpec& matrix, const MethodSpec& defaults,
                                      const std::map<std::string, BackendKind, std::less<>>& kinds,
                                      const toml::node& where) {
  for (const auto* ids : {&matrix.speakers, &matrix.transferors}) {
    for (const std::string& id : *ids) {
      if (!kinds.contains(id)) fail_at(where, "matrix names unknown backend " + id, ErrorCode::UnknownBackendRef);
    }
  }
  std::vector<MethodSpec> out;
  for (const std::string& speaker : matrix.speakers) {
    for (MethodKind kind : matrix.kinds) {
      std::vector<std::optional<std::string>> transferors;
      if (kind == MethodKind::natlan || kind == MethodKind::nmt_first) {
        for (const std::string& t : matrix.transferors) transferors.emplace_back(t);
      } else {
        transferors.emplace_back(std::nullopt);
      }
      for (const auto& t : transferors) {
        MethodSpec m = defaults;
        m.name.clear();
        m.kind = kind;
        m.speaker = speaker;
        m.transferor = t;
        m.from_matrix = true;
        try {
          check_roles(m, kinds);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::InvalidRoleCombination) continue;
          throw;
        }
        out.push_back(std::move(m));
      }
    }
  }
  return out;
}

}  // namespace

const MethodSpec* ExperimentConfig::find_method(std::string_view label) const {
  for (const MethodSpec& m : methods) {
    if (m.label() == label) return &m;
  }
  return nullptr;
}

ExperimentConfig parse_config(std::string_view text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw LineError(ErrorCode::ParseError, e.source().begin.line, std::string(e.description()));
  }

  ExperimentConfig cfg;
  Reader top(root, "config");
  top.allow({"dataset", "run", "decoding", "backends", "methods", "matrix"});

  // [dataset]
  if (const toml::table* t = top.table("dataset")) {
    Reader r(*t, "dataset");
    r.allow({"root", "registry", "translated_dev_dir", "shots", "disciplines"});
    cfg.dataset.root = resolve(base_dir, r.str("root").value_or(""));
    cfg.dataset.registry = resolve(base_dir, r.str("registry").value_or(""));
    if (auto v = r.str("translated_dev_dir")) cfg.dataset.translated_dev_dir = *v;
    cfg.dataset.shots = static_cast<std::size_t>(r.small_int("shots", 5, 0));
    if (auto v = r.strings("disciplines")) cfg.dataset.only = *v;
  }
  if (cfg.dataset.root.empty()) throw Error(ErrorCode::ParseError, "dataset.root is required");
  if (cfg.dataset.registry.empty()) {
    cfg.dataset.registry = (fs::path(cfg.dataset.root) / "disciplines.tsv").string();
  }

  // [run] and [decoding] feed the method defaults.
  MethodSpec& defaults = cfg.method_defaults;
  defaults.cfg.shots = cfg.dataset.shots;
  if (const toml::table* t = top.table("run")) {
    Reader r(*t, "run");
    r.allow({"split", "weighting", "extraction", "cache", "out", "template_version",
             "templates_dir", "workers", "abstention", "discipline_name_style",
             "nmt_segmentwise", "back_translate", "target_language", "native_language"});
    cfg.split = parse_enum(r, "split", cfg.split, parse_split);
    cfg.dataset.split = cfg.split;
    cfg.weighting = parse_enum(r, "weighting", cfg.weighting, parse_weighting);
    cfg.cache_path = resolve(base_dir, r.str("cache").value_or(""));
    cfg.out_dir = resolve(base_dir, r.str("out").value_or("out"));
    cfg.templates_dir = resolve(base_dir, r.str("templates_dir").value_or(""));
    cfg.workers = static_cast<std::size_t>(r.small_int("workers", 0, 0));
    cfg.abstention = parse_enum(r, "abstention", cfg.abstention, parse_choice);
    read_method_settings(r, defaults);
  } else {
    cfg.out_dir = resolve(base_dir, "out");
  }
  if (const toml::table* t = top.table("decoding")) {
    Reader r(*t, "decoding");
    r.allow({"answer", "translation"});
    defaults.answer_decoding = read_decoding(r, "answer", defaults.answer_decoding);
    defaults.translation_decoding = read_decoding(r, "translation", defaults.translation_decoding);
  }

  // [[backends]]
  std::map<std::string, BackendKind, std::less<>> kinds;
  if (const toml::node* n = top.node("backends")) {
    const toml::array* arr = n->as_array();
    if (!arr) fail_at(*n, "backends must be an array of tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::table* t = (*arr)[i].as_table();
      if (!t) fail_at((*arr)[i], "backends must be an array of tables");
      BackendSpec b = read_backend(Reader(*t, "backends[" + std::to_string(i) + "]"), base_dir);
      if (kinds.contains(b.id)) {
        fail_at(*t, "duplicate backend id " + b.id, ErrorCode::DuplicateBackendId);
      }
      kinds[b.id] = b.kind;
      cfg.backends.push_back(std::move(b));
    }
  }

  // [[methods]]
  std::set<std::string> fingerprints, labels;
  if (const toml::node* n = top.node("methods")) {
    const toml::array* arr = n->as_array();
    if (!arr) fail_at(*n, "methods must be an array of tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::table* t = (*arr)[i].as_table();
      if (!t) fail_at((*arr)[i], "methods must be an array of tables");
      MethodSpec m = read_method(Reader(*t, "methods[" + std::to_string(i) + "]"), defaults);
      check_method(m, kinds, *t);
      if (!labels.insert(m.label()).second) fail_at(*t, "duplicate method label " + m.label());
      fingerprints.insert(m.fingerprint());
      cfg.methods.push_back(std::move(m));
    }
  }

  // [matrix]
  if (const toml::table* t = top.table("matrix")) {
    Reader r(*t, "matrix");
    r.allow({"speakers", "transferors", "kinds"});
    MatrixSpec matrix;
    matrix.speakers = r.strings("speakers").value_or(std::vector<std::string>{});
    matrix.transferors = r.strings("transferors").value_or(std::vector<std::string>{});
    for (const std::string& k : r.strings("kinds").value_or(std::vector<std::string>{})) {
      const auto kind = parse_method_kind(k);
      if (!kind) fail_at(*r.node("kinds"), "unknown method kind " + k);
      matrix.kinds.push_back(*kind);
    }
    for (MethodSpec& m : expand_matrix(matrix, defaults, kinds, *t)) {
      if (!fingerprints.insert(m.fingerprint()).second) continue;
      if (!labels.insert(m.label()).second) fail_at(*t, "duplicate method label " + m.label());
      cfg.methods.push_back(std::move(m));
    }
    cfg.matrix = std::move(matrix);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = text::read_file(path);
  const fs::path abs = fs::absolute(path);
  try {
    return parse_config(text, abs.parent_path().string());
  } catch (const LineError& e) {
    throw LineError(e.code(), e.line(), path + ": " + e.what());
  }
}

namespace {

toml::table decoding_table(const DecodingParams& d) {
  toml::array stop;
  for (const std::string& s : d.stop) stop.push_back(s);
  toml::table t{{"temperature", d.temperature}, {"max_tokens", d.max_tokens}, {"stop", stop}};
  t.is_inline(true);
  return t;
}

toml::array string_array(const std::vector<std::string>& v) {
  toml::array a;
  for (const std::string& s : v) a.push_back(s);
  return a;
}

void write_method_settings(toml::table& t, const MethodSpec& m, bool with_shots) {
  if (with_shots) t.insert_or_assign("shots", static_cast<std::int64_t>(m.cfg.shots));
  t.insert_or_assign("template_version", m.cfg.template_version);
  t.insert_or_assign("discipline_name_style", std::string(to_string(m.cfg.discipline_name_style)));
  t.insert_or_assign("extraction", std::string(to_string(m.extraction)));
  t.insert_or_assign("nmt_segmentwise", m.nmt_segmentwise);
  t.insert_or_assign("back_translate", m.back_translate);
  t.insert_or_assign("target_language", m.target_language);
  t.insert_or_assign("native_language", m.native_language);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  toml::table root;

  toml::table dataset{{"root", cfg.dataset.root},
                      {"registry", cfg.dataset.registry},
                      {"translated_dev_dir", cfg.dataset.translated_dev_dir},
                      {"shots", static_cast<std::int64_t>(cfg.dataset.shots)}};
  if (!cfg.dataset.only.empty()) dataset.insert("disciplines", string_array(cfg.dataset.only));
  root.insert("dataset", dataset);

  toml::table run{{"split", std::string(to_string(cfg.split))},
                  {"weighting", std::string(to_string(cfg.weighting))},
                  {"out", cfg.out_dir},
                  {"workers", static_cast<std::int64_t>(cfg.workers)},
                  {"abstention", std::string(1, to_char(cfg.abstention))}};
  if (!cfg.cache_path.empty()) run.insert("cache", cfg.cache_path);
  if (!cfg.templates_dir.empty()) run.insert("templates_dir", cfg.templates_dir);
  write_method_settings(run, cfg.method_defaults, false);
  root.insert("run", run);

  root.insert("decoding", toml::table{{"answer", decoding_table(cfg.method_defaults.answer_decoding)},
                                      {"translation",
                                       decoding_table(cfg.method_defaults.translation_decoding)}});

  toml::array backends;
  for (const BackendSpec& b : cfg.backends) {
    toml::table t{{"id", b.id},
                  {"kind", std::string(to_string(b.kind))},
                  {"max_in_flight", b.max_in_flight},
                  {"timeout_ms", b.timeout_ms}};
    if (!b.endpoint.empty()) t.insert("endpoint", b.endpoint);
    if (!b.model_name.empty()) t.insert("model", b.model_name);
    if (!b.auth.empty()) t.insert("auth", b.auth);
    if (!b.script.empty()) t.insert("script", b.script);
    toml::table retry{{"attempts", b.retry.attempts}, {"backoff_ms", b.retry.backoff_ms}};
    retry.is_inline(true);
    t.insert("retry", retry);
    backends.push_back(std::move(t));
  }
  if (!backends.empty()) root.insert("backends", backends);

  toml::array methods;
  for (const MethodSpec& m : cfg.methods) {
    if (m.from_matrix) continue;
    toml::table t{{"kind", std::string(to_string(m.kind))}, {"speaker", m.speaker}};
    if (!m.name.empty()) t.insert("name", m.name);
    if (m.transferor) t.insert("transferor", *m.transferor);
    write_method_settings(t, m, true);
    t.insert("answer_decoding", decoding_table(m.answer_decoding));
    t.insert("translation_decoding", decoding_table(m.translation_decoding));
    methods.push_back(std::move(t));
  }
  if (!methods.empty()) root.insert("methods", methods);

  if (cfg.matrix) {
    toml::array kinds;
    for (MethodKind k : cfg.matrix->kinds) kinds.push_back(std::string(to_string(k)));
    root.insert("matrix", toml::table{{"speakers", string_array(cfg.matrix->speakers)},
                                      {"transferors", string_array(cfg.matrix->transferors)},
                                      {"kinds", kinds}});
  }

  std::ostringstream os;
  os << root << '\n';
  return os.str();
}

BackendRegistry build_registry(const ExperimentConfig& cfg) {
  BackendRegistry registry;
  for (const BackendSpec& b : cfg.backends) registry.add(make_backend(b));
  return registry;
}

std::vector<MethodSpec> select_methods(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& labels) {
  if (labels.empty()) return cfg.methods;
  std::vector<MethodSpec> out;
  for (const std::string& label : labels) {
    const MethodSpec* m = cfg.find_method(label);
    if (!m) throw Error(ErrorCode::Usage, "no method labelled " + label);
    out.push_back(*m);
  }
  return out;
}

}  // namespace natlan
