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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace natlan {

/// Lowercase hex SHA-256 of the bytes of \p data.
std::string sha256_hex(std::string_view data);

/// Raw 32-byte SHA-256 digest.
std::vector<std::uint8_t> sha256_raw(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Strict standard-alphabet decoding; std::nullopt on any malformed input.
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

}  // namespace natlan
