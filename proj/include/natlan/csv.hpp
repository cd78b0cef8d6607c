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

namespace natlan::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
/// line breaks. A leading UTF-8 BOM is skipped; blank lines are dropped.
/// Throws LineError(RowParseError) on an unterminated quoted field.
std::vector<Row> parse(std::string_view data, char sep = ',');

/// Quotes a field when it contains the separator, a quote, or a line break.
std::string escape(std::string_view field, char sep = ',');

std::string join(const std::vector<std::string>& fields, char sep = ',');

}  // namespace natlan::csv
