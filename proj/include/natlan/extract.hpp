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

#include <cstddef>
#include <optional>
#include <string_view>

#include "natlan/dataset.hpp"

namespace natlan {

enum class ExtractionMode { strict, lenient };

std::string_view to_string(ExtractionMode m);
std::optional<ExtractionMode> parse_extraction_mode(std::string_view s);

struct MatchedSpan {
  std::size_t offset = 0;  // bytes into the raw reply
  std::size_t length = 0;

  bool operator==(const MatchedSpan&) const = default;
};

struct ExtractionOutcome {
  std::optional<Choice> choice;
  ExtractionMode mode = ExtractionMode::strict;
  std::optional<MatchedSpan> matched_span;  // present iff choice is
};

/// strict: the whitespace-trimmed reply is exactly one of "A".."D".
/// lenient: the first standalone A-D letter, case-insensitive, including
/// full-width forms. Standalone means neither neighbour is a Latin letter,
/// digit or underscore (ASCII or full-width); CJK text and punctuation
/// count as boundaries.
///
/// Total over arbitrary bytes.
ExtractionOutcome extract_choice(std::string_view raw, ExtractionMode mode) noexcept;

}  // namespace natlan
