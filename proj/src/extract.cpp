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
#include "natlan/extract.hpp"

#include "natlan/text.hpp"

namespace natlan {

std::string_view to_string(ExtractionMode m) {
  return m == ExtractionMode::strict ? "strict" : "lenient";
}

std::optional<ExtractionMode> parse_extraction_mode(std::string_view s) {
  if (s == "strict") return ExtractionMode::strict;
  if (s == "lenient") return ExtractionMode::lenient;
  return std::nullopt;
}

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

struct Decoded {
  char32_t cp = kInvalid;
  std::size_t length = 1;
};

// Minimal UTF-8 decode; malformed sequences yield kInvalid with length 1.
Decoded decode_at(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {};
  }
  if (i + len > s.size()) return {};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

Decoded decode_before(std::string_view s, std::size_t i) {
  std::size_t start = i;
  for (std::size_t back = 1; back <= 4 && back <= i; ++back) {
    const auto b = static_cast<unsigned char>(s[i - back]);
    if ((b & 0xC0) != 0x80) {
      start = i - back;
      break;
    }
  }
  if (start == i) return {};
  Decoded d = decode_at(s, start);
  if (d.cp == kInvalid || start + d.length != i) return {};
  return d;
}

bool is_word(char32_t cp) {
  if (cp == kInvalid) return false;
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
      (cp >= '0' && cp <= '9') || cp == '_') {
    return true;
  }
  return (cp >= 0xFF10 && cp <= 0xFF19) || (cp >= 0xFF21 && cp <= 0xFF3A) ||
         (cp >= 0xFF41 && cp <= 0xFF5A);
}

std::optional<Choice> as_choice(char32_t cp) {
  if (cp >= 'A' && cp <= 'D') return static_cast<Choice>(cp - 'A');
  if (cp >= 'a' && cp <= 'd') return static_cast<Choice>(cp - 'a');
  if (cp >= 0xFF21 && cp <= 0xFF24) return static_cast<Choice>(cp - 0xFF21);
  if (cp >= 0xFF41 && cp <= 0xFF44) return static_cast<Choice>(cp - 0xFF41);
  return std::nullopt;
}

ExtractionOutcome strict(std::string_view raw) {
  ExtractionOutcome out;
  out.mode = ExtractionMode::strict;
  const std::string_view trimmed = text::trim(raw);
  if (auto c = parse_choice(trimmed)) {
    out.choice = c;
    out.matched_span = MatchedSpan{
        static_cast<std::size_t>(trimmed.data() - raw.data()), 1};
  }
  return out;
}

ExtractionOutcome lenient(std::string_view raw) {
  ExtractionOutcome out;
  out.mode = ExtractionMode::lenient;
  std::size_t i = 0;
  while (i < raw.size()) {
    const Decoded d = decode_at(raw, i);
    if (auto c = as_choice(d.cp)) {
      const bool left_ok = i == 0 || !is_word(decode_before(raw, i).cp);
      const std::size_t next = i + d.length;
      const bool right_ok = next >= raw.size() || !is_word(decode_at(raw, next).cp);
      if (left_ok && right_ok) {
        out.choice = c;
        out.matched_span = MatchedSpan{i, d.length};
        return out;
      }
    }
    i += d.length;
  }
  return out;
}

}  // namespace

ExtractionOutcome extract_choice(std::string_view raw, ExtractionMode mode) noexcept {
  return mode == ExtractionMode::strict ? strict(raw) : lenient(raw);
}

}  // namespace natlan
