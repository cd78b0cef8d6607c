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
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "natlan/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "natlan/codec.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace natlan {

using nlohmann::json;

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::chat_http: return "chat_http";
    case BackendKind::nmt_http: return "nmt_http";
    case BackendKind::mock: return "mock";
  }
  return "mock";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "chat_http") return BackendKind::chat_http;
  if (s == "nmt_http") return BackendKind::nmt_http;
  if (s == "mock") return BackendKind::mock;
  return std::nullopt;
}

void BackendSpec::validate() const {
  if (id.empty()) throw Error(ErrorCode::Usage, "backend without id");
  if (max_in_flight < 1) {
    throw Error(ErrorCode::Usage, "backend " + id + ": max_in_flight must be >= 1");
  }
  if (retry.attempts < 1) {
    throw Error(ErrorCode::Usage, "backend " + id + ": retry.attempts must be >= 1");
  }
  const bool http = kind != BackendKind::mock;
  if (http && endpoint.empty()) {
    throw Error(ErrorCode::Usage, "backend " + id + ": endpoint required");
  }
  if (!http && !endpoint.empty()) {
    throw Error(ErrorCode::Usage, "backend " + id + ": mock backends take no endpoint");
  }
}

json messages_to_json(std::span<const ChatMessage> messages) {
  json out = json::array();
  for (const ChatMessage& m : messages) {
    out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return out;
}

json decoding_to_json(const DecodingParams& decoding) {
  return {{"temperature", decoding.temperature},
          {"max_tokens", decoding.max_tokens},
          {"stop", decoding.stop}};
}

std::string request_fingerprint(std::string_view backend_id,
                                std::span<const ChatMessage> messages,
                                const DecodingParams& decoding) {
  const json canonical = {{"backend", backend_id},
                           {"messages", messages_to_json(messages)},
                           {"decoding", decoding_to_json(decoding)}};
  return sha256_hex(canonical.dump());
}

namespace {

std::string translate_fingerprint(std::string_view backend_id,
                                  std::span<const std::string> segments,
                                  std::string_view source, std::string_view target) {
  const json canonical = {{"backend", backend_id},
                          {"q", std::vector<std::string>(segments.begin(), segments.end())},
                          {"source", source},
                          {"target", target}};
  return sha256_hex(canonical.dump());
}

bool is_transient(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

InFlightLimiter::InFlightLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return current_ < limit_; });
  ++current_;
  if (current_ > peak_) peak_ = current_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --current_;
  }
  cv_.notify_one();
}

int InFlightLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Backend::Backend(BackendSpec spec)
    : spec_(std::move(spec)), limiter_(spec_.max_in_flight) {}

template <class Fn>
auto Backend::with_retry(Fn&& fn, int* retries) -> decltype(fn()) {
  {
    std::lock_guard lock(count_mu_);
    ++calls_;
  }
  const int attempts = spec_.retry.attempts < 1 ? 1 : spec_.retry.attempts;
  for (int attempt = 0;; ++attempt) {
    try {
      InFlightLimiter::Guard guard(limiter_);
      return fn();
    } catch (const TransportError& e) {
      if (!is_transient(e.status()) || attempt + 1 >= attempts) {
        if (e.status() == 429) {
          throw TransportError(ErrorCode::RateLimited, 429, e.what());
        }
        throw;
      }
    }
    if (retries) ++*retries;
    const long long delay = static_cast<long long>(spec_.retry.backoff_ms) << attempt;
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }
}

ChatResponse Backend::complete(std::span<const ChatMessage> messages,
                               const DecodingParams& decoding) {
  int retries = 0;
  ChatResponse r = with_retry([&] { return do_complete(messages, decoding); }, &retries);
  r.retries = retries;
  r.request_fingerprint = request_fingerprint(spec_.id, messages, decoding);
  return r;
}

std::vector<std::string> Backend::translate_plain(std::span<const std::string> segments,
                                                  std::string_view source,
                                                  std::string_view target) {
  if (segments.empty()) throw Error(ErrorCode::EmptyTranslation, "no segments to translate");
  for (const std::string& s : segments) {
    if (text::trim(s).empty()) {
      throw Error(ErrorCode::EmptyTranslation, "empty segment passed to " + spec_.id);
    }
  }
  std::vector<std::string> out =
      with_retry([&] { return do_translate(segments, source, target); }, nullptr);
  if (out.size() != segments.size()) {
    throw Error(ErrorCode::MalformedResponse,
                spec_.id + ": " + std::to_string(out.size()) + " translations for " +
                    std::to_string(segments.size()) + " segments");
  }
  for (const std::string& s : out) {
    if (text::trim(s).empty()) {
      throw Error(ErrorCode::EmptyTranslation, spec_.id + " returned an empty translation");
    }
  }
  return out;
}

std::string Backend::translate_plain(std::string_view text, std::string_view source,
                                     std::string_view target) {
  const std::string segment(text);
  return translate_plain(std::span<const std::string>(&segment, 1), source, target).front();
}

std::size_t Backend::call_count() const {
  std::lock_guard lock(count_mu_);
  return calls_;
}

ChatResponse Backend::do_complete(std::span<const ChatMessage>, const DecodingParams&) {
  throw Error(ErrorCode::UnsupportedOperation,
              "backend " + spec_.id + " (" + std::string(to_string(spec_.kind)) +
                  ") cannot answer chat requests");
}

std::vector<std::string> Backend::do_translate(std::span<const std::string>,
                                               std::string_view, std::string_view) {
  throw Error(ErrorCode::UnsupportedOperation,
              "backend " + spec_.id + " (" + std::string(to_string(spec_.kind)) +
                  ") cannot translate plain text");
}

// --- HTTP ------------------------------------------------------------------

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  const std::size_t path_start =
      endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

httplib::Headers auth_headers(const BackendSpec& spec) {
  httplib::Headers headers;
  if (!spec.auth.empty()) {
    if (const char* token = std::getenv(spec.auth.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

json post_json(const BackendSpec& spec, const std::string& path, const json& body,
               std::int64_t* latency_ms) {
  const Url url = split_url(spec.endpoint);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(spec.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, auth_headers(spec), body.dump(), "application/json");
  if (latency_ms) {
    *latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  }
  if (!res) {
    throw TransportError(ErrorCode::Transport, 0,
                         spec.id + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError(res->status == 429 ? ErrorCode::RateLimited : ErrorCode::Transport,
                         res->status,
                         spec.id + ": HTTP " + std::to_string(res->status));
  }
  json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw Error(ErrorCode::MalformedResponse, spec.id + ": response is not JSON");
  }
  return parsed;
}

}  // namespace

ChatHttpBackend::ChatHttpBackend(BackendSpec spec) : Backend(std::move(spec)) {}

ChatResponse ChatHttpBackend::do_complete(std::span<const ChatMessage> messages,
                                          const DecodingParams& decoding) {
  json body = {{"model", spec().model_name},
               {"messages", messages_to_json(messages)},
               {"temperature", decoding.temperature},
               {"max_tokens", decoding.max_tokens},
               {"n", 1}};
  if (!decoding.stop.empty()) body["stop"] = decoding.stop;

  std::string path = split_url(spec().endpoint).path;
  if (!path.ends_with("/chat/completions")) {
    while (path.ends_with('/')) path.pop_back();
    path += "/v1/chat/completions";
  }
  ChatResponse out;
  const json reply = post_json(spec(), path, body, &out.latency_ms);
  const json* content = nullptr;
  if (reply.contains("choices") && reply["choices"].is_array() &&
      !reply["choices"].empty()) {
    const json& choice = reply["choices"][0];
    if (choice.contains("message") && choice["message"].is_object() &&
        choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      content = &choice["message"]["content"];
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
      out.finish_reason = choice["finish_reason"].get<std::string>();
    }
  }
  if (!content) {
    throw Error(ErrorCode::MalformedResponse,
                spec().id + ": response lacks choices[0].message.content");
  }
  out.text = content->get<std::string>();
  return out;
}

NmtHttpBackend::NmtHttpBackend(BackendSpec spec) : Backend(std::move(spec)) {}

std::vector<std::string> NmtHttpBackend::do_translate(std::span<const std::string> segments,
                                                      std::string_view source,
                                                      std::string_view target) {
  const json body = {{"q", std::vector<std::string>(segments.begin(), segments.end())},
                     {"source", source},
                     {"target", target}};
  std::string path = split_url(spec().endpoint).path;
  if (path.empty()) path = "/";
  const json reply = post_json(spec(), path, body, nullptr);

  const json* list = nullptr;
  if (reply.contains("translations")) {
    list = &reply["translations"];
  } else if (reply.contains("data") && reply["data"].is_object() &&
             reply["data"].contains("translations")) {
    list = &reply["data"]["translations"];
  }
  if (!list || !list->is_array()) {
    throw Error(ErrorCode::MalformedResponse, spec().id + ": response lacks translations");
  }
  std::vector<std::string> out;
  for (const json& item : *list) {
    if (item.is_string()) {
      out.push_back(item.get<std::string>());
    } else if (item.is_object() && item.contains("translatedText") &&
               item["translatedText"].is_string()) {
      out.push_back(item["translatedText"].get<std::string>());
    } else {
      throw Error(ErrorCode::MalformedResponse, spec().id + ": bad translation entry");
    }
  }
  return out;
}

// --- Mock ------------------------------------------------------------------

MockBackend::MockBackend(BackendSpec spec, json script)
    : Backend(std::move(spec)), script_(std::move(script)) {
  if (!script_.is_object()) {
    throw Error(ErrorCode::ParseError, "mock script for " + id() + " must be an object");
  }
  const std::string mode = script_.value("mode", std::string("ordinal"));
  if (mode == "ordinal") {
    mode_ = Mode::ordinal;
  } else if (mode == "fingerprint") {
    mode_ = Mode::fingerprint;
  } else if (mode == "match") {
    mode_ = Mode::match;
  } else {
    throw Error(ErrorCode::ParseError, "mock script mode '" + mode + "' unknown");
  }
  delay_ms_ = script_.value("delay_ms", 0);
}

std::shared_ptr<MockBackend> MockBackend::from_spec(BackendSpec spec) {
  spec.kind = BackendKind::mock;
  json script = json::object();
  if (!spec.script.empty()) {
    script = json::parse(text::read_file(spec.script), nullptr, false);
    if (script.is_discarded()) {
      throw Error(ErrorCode::ParseError, "mock script is not JSON: " + spec.script);
    }
  }
  return std::make_shared<MockBackend>(std::move(spec), std::move(script));
}

std::shared_ptr<MockBackend> mock_from_script(const std::string& script_path, std::string id) {
  BackendSpec spec;
  spec.id = std::move(id);
  spec.kind = BackendKind::mock;
  spec.script = script_path;
  return MockBackend::from_spec(std::move(spec));
}

json MockBackend::next_entry(std::string_view fingerprint, std::string_view last_content) {
  switch (mode_) {
    case Mode::ordinal: {
      const json& responses = script_.contains("responses") ? script_["responses"] : json::array();
      if (cursor_ >= responses.size()) {
        throw Error(ErrorCode::ScriptExhausted,
                    id() + ": script exhausted after " + std::to_string(cursor_) + " replies");
      }
      return responses[cursor_++];
    }
    case Mode::fingerprint: {
      if (script_.contains("by_fingerprint")) {
        const json& table = script_["by_fingerprint"];
        auto it = table.find(std::string(fingerprint));
        if (it != table.end()) return *it;
      }
      break;
    }
    case Mode::match: {
      if (script_.contains("rules")) {
        for (const json& rule : script_["rules"]) {
          const std::string needle = rule.value("contains", std::string());
          if (last_content.find(needle) != std::string_view::npos) return rule.at("reply");
        }
      }
      break;
    }
  }
  if (script_.contains("default")) return script_["default"];
  throw Error(ErrorCode::UnknownFingerprint,
              id() + ": no scripted reply for request " + std::string(fingerprint));
}

namespace {

ChatResponse entry_to_response(const json& entry, const std::string& backend_id) {
  ChatResponse out;
  if (entry.is_string()) {
    out.text = entry.get<std::string>();
    out.finish_reason = "stop";
    return out;
  }
  if (!entry.is_object()) {
    throw Error(ErrorCode::MalformedResponse, backend_id + ": bad script entry");
  }
  const int status = entry.value("status", 200);
  if (status != 200) {
    throw TransportError(status == 429 ? ErrorCode::RateLimited : ErrorCode::Transport,
                         status, backend_id + ": scripted HTTP " + std::to_string(status));
  }
  if (!entry.contains("text") || !entry["text"].is_string()) {
    throw Error(ErrorCode::MalformedResponse, backend_id + ": scripted reply lacks text");
  }
  out.text = entry["text"].get<std::string>();
  out.finish_reason = entry.value("finish_reason", std::string("stop"));
  return out;
}

}  // namespace

ChatResponse MockBackend::do_complete(std::span<const ChatMessage> messages,
                                      const DecodingParams& decoding) {
  const std::string fp = request_fingerprint(id(), messages, decoding);
  json entry;
  {
    std::lock_guard lock(mu_);
    log_.push_back({"complete", fp,
                    {{"messages", messages_to_json(messages)},
                     {"decoding", decoding_to_json(decoding)}}});
    entry = next_entry(fp, messages.empty() ? std::string_view{} : messages.back().content);
  }
  if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
  ChatResponse out = entry_to_response(entry, id());
  out.latency_ms = delay_ms_;
  return out;
}

std::vector<std::string> MockBackend::do_translate(std::span<const std::string> segments,
                                                   std::string_view source,
                                                   std::string_view target) {
  const std::string fp = translate_fingerprint(id(), segments, source, target);
  std::lock_guard lock(mu_);
  log_.push_back({"translate", fp,
                  {{"q", std::vector<std::string>(segments.begin(), segments.end())},
                   {"source", source},
                   {"target", target}}});
  const json& table = script_.contains("translations") ? script_["translations"] : json::object();
  std::vector<std::string> out;
  for (const std::string& s : segments) {
    auto it = table.find(s);
    if (it == table.end() || !it->is_string()) {
      throw Error(ErrorCode::UnknownFingerprint, id() + ": no scripted translation for segment");
    }
    out.push_back(it->get<std::string>());
  }
  return out;
}

std::vector<LoggedRequest> MockBackend::request_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

void MockBackend::clear_log() {
  std::lock_guard lock(mu_);
  log_.clear();
}

std::shared_ptr<Backend> make_backend(const BackendSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case BackendKind::chat_http: return std::make_shared<ChatHttpBackend>(spec);
    case BackendKind::nmt_http: return std::make_shared<NmtHttpBackend>(spec);
    case BackendKind::mock: return MockBackend::from_spec(spec);
  }
  throw Error(ErrorCode::Usage, "unknown backend kind");
}

void BackendRegistry::add(std::shared_ptr<Backend> backend) {
  const std::string id = backend->id();
  if (!backends_.emplace(id, std::move(backend)).second) {
    throw Error(ErrorCode::DuplicateBackendId, "duplicate backend id " + id);
  }
}

Backend& BackendRegistry::get(std::string_view id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) {
    throw Error(ErrorCode::UnknownBackendRef, "unknown backend " + std::string(id));
  }
  return *it->second;
}

bool BackendRegistry::contains(std::string_view id) const {
  return backends_.find(id) != backends_.end();
}

std::map<std::string, std::size_t> BackendRegistry::call_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [id, b] : backends_) out[id] = b->call_count();
  return out;
}

std::map<std::string, BackendKind, std::less<>> BackendRegistry::kinds() const {
  std::map<std::string, BackendKind, std::less<>> out;
  for (const auto& [id, b] : backends_) out[id] = b->spec().kind;
  return out;
}

}  // namespace natlan
