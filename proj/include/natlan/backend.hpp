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

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "natlan/promptkit.hpp"

namespace natlan {

enum class BackendKind { chat_http, nmt_http, mock };

std::string_view to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 500;

  bool operator==(const RetryPolicy&) const = default;
};

struct BackendSpec {
  std::string id;
  BackendKind kind = BackendKind::mock;
  std::string endpoint;    // *_http only
  std::string model_name;
  std::string auth;        // name of the env var holding a bearer token
  int max_in_flight = 1;
  RetryPolicy retry;
  int timeout_ms = 120000;
  std::string script;      // mock only: path of the replay script

  /// Throws Error(Usage) on a broken invariant.
  void validate() const;
  bool operator==(const BackendSpec&) const = default;
};

struct DecodingParams {
  double temperature = 0.0;  // greedy
  int max_tokens = 8;
  std::vector<std::string> stop;

  bool operator==(const DecodingParams&) const = default;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason;
  std::int64_t latency_ms = 0;
  std::string request_fingerprint;
  int retries = 0;
};

nlohmann::json messages_to_json(std::span<const ChatMessage> messages);
nlohmann::json decoding_to_json(const DecodingParams& decoding);

/// SHA-256 over the canonical JSON of (backend id, messages, decoding).
std::string request_fingerprint(std::string_view backend_id,
                                std::span<const ChatMessage> messages,
                                const DecodingParams& decoding);

/// Bounds concurrently outstanding requests and records the high-water mark.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit);

  void acquire();
  void release();
  int peak() const;

  class Guard {
   public:
    explicit Guard(InFlightLimiter& l) : limiter_(l) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimiter& limiter_;
  };

 private:
  const int limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int current_ = 0;
  int peak_ = 0;
};

/// Shareable producer of answers and translations. complete() and
/// translate_plain() are safe to call concurrently; the in-flight limiter is
/// the only synchronization point.
class Backend {
 public:
  explicit Backend(BackendSpec spec);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }

  /// Chat completion with the retry policy applied to transient failures
  /// (HTTP 429, 5xx, transport resets). Throws TransportError
  /// (Transport/RateLimited) once attempts are exhausted.
  ChatResponse complete(std::span<const ChatMessage> messages,
                        const DecodingParams& decoding);

  /// Segment-wise machine translation: one output per input segment, in
  /// order. Throws Error(EmptyTranslation) on empty input or output.
  std::vector<std::string> translate_plain(std::span<const std::string> segments,
                                           std::string_view source,
                                           std::string_view target);
  std::string translate_plain(std::string_view text, std::string_view source,
                              std::string_view target);

  /// Logical calls (complete + translate_plain), retries excluded.
  std::size_t call_count() const;
  int peak_in_flight() const { return limiter_.peak(); }

 protected:
  virtual ChatResponse do_complete(std::span<const ChatMessage> messages,
                                   const DecodingParams& decoding);
  virtual std::vector<std::string> do_translate(std::span<const std::string> segments,
                                                std::string_view source,
                                                std::string_view target);

 private:
  template <class Fn>
  auto with_retry(Fn&& fn, int* retries) -> decltype(fn());

  BackendSpec spec_;
  InFlightLimiter limiter_;
  mutable std::mutex count_mu_;
  std::size_t calls_ = 0;
};

/// POST {endpoint}/v1/chat/completions with the OpenAI-compatible schema.
class ChatHttpBackend : public Backend {
 public:
  explicit ChatHttpBackend(BackendSpec spec);

 protected:
  ChatResponse do_complete(std::span<const ChatMessage> messages,
                           const DecodingParams& decoding) override;
};

/// POST {endpoint} with {q: [...], source, target}; accepts either
/// {translations: [text...]} or {data: {translations: [{translatedText}]}}.
class NmtHttpBackend : public Backend {
 public:
  explicit NmtHttpBackend(BackendSpec spec);

 protected:
  std::vector<std::string> do_translate(std::span<const std::string> segments,
                                        std::string_view source,
                                        std::string_view target) override;
};

/// One request as seen by a mock backend.
struct LoggedRequest {
  std::string operation;  // "complete" or "translate"
  std::string fingerprint;
  nlohmann::json payload;

  bool operator==(const LoggedRequest&) const = default;
};

/// Replays canned replies from a JSON script. Three addressing modes:
///   ordinal      "responses": [entry, ...] consumed in call order
///   fingerprint  "by_fingerprint": {hex: entry}
///   match        "rules": [{"contains": s, "reply": entry}] tested in order
///                against the final message
/// An entry is a string or {"text", "status", "finish_reason"}; a non-200
/// status simulates a transport failure. "default" answers unmatched
/// requests in fingerprint/match mode. "translations" maps source segments
/// to target segments for translate_plain.
class MockBackend : public Backend {
 public:
  MockBackend(BackendSpec spec, nlohmann::json script);

  /// Reads spec.script; the returned backend has kind == mock.
  static std::shared_ptr<MockBackend> from_spec(BackendSpec spec);

  std::vector<LoggedRequest> request_log() const;
  void clear_log();

 protected:
  ChatResponse do_complete(std::span<const ChatMessage> messages,
                           const DecodingParams& decoding) override;
  std::vector<std::string> do_translate(std::span<const std::string> segments,
                                        std::string_view source,
                                        std::string_view target) override;

 private:
  nlohmann::json next_entry(std::string_view fingerprint, std::string_view last_content);

  enum class Mode { ordinal, fingerprint, match };
  Mode mode_ = Mode::ordinal;
  nlohmann::json script_;
  int delay_ms_ = 0;
  mutable std::mutex mu_;
  std::size_t cursor_ = 0;
  std::vector<LoggedRequest> log_;
};

/// Builds a mock backend from a script file, with kind == mock.
std::shared_ptr<MockBackend> mock_from_script(const std::string& script_path,
                                              std::string id = "mock");

std::shared_ptr<Backend> make_backend(const BackendSpec& spec);

class BackendRegistry {
 public:
  void add(std::shared_ptr<Backend> backend);
  Backend& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::map<std::string, std::size_t> call_counts() const;
  std::map<std::string, BackendKind, std::less<>> kinds() const;

 private:
  std::map<std::string, std::shared_ptr<Backend>, std::less<>> backends_;
};

}  // namespace natlan
