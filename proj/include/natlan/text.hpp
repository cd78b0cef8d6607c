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

#include <string>
#include <string_view>
#include <vector>

namespace natlan::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view trim(std::string_view s);

/// Removes trailing CR/LF only; everything else is kept verbatim.
std::string_view trim_line_breaks(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

/// Ordering for question ids: numeric ids compare by value, otherwise
/// lexicographically; numeric sorts before non-numeric.
bool id_less(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);

/// Writes via a sibling temp file and rename so readers never see a
/// partially written artifact.
void write_file(const std::string& path, std::string_view contents);

}  // namespace natlan::text
