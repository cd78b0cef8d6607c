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
#include "natlan/error.hpp"

namespace natlan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MissingDisciplines: return "MissingDisciplines";
    case ErrorCode::DuplicateDisciplineId: return "DuplicateDisciplineId";
    case ErrorCode::UnknownSubdomain: return "UnknownSubdomain";
    case ErrorCode::RowParseError: return "RowParseError";
    case ErrorCode::MissingGoldLabel: return "MissingGoldLabel";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::GoldMismatch: return "GoldMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::InsufficientShots: return "InsufficientShots";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::MissingTranslatedDev: return "MissingTranslatedDev";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::EmptyTranslation: return "EmptyTranslation";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::UnknownFingerprint: return "UnknownFingerprint";
    case ErrorCode::UnsupportedOperation: return "UnsupportedOperation";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::UnknownDiscipline: return "UnknownDiscipline";
    case ErrorCode::TableMismatch: return "TableMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::MissingCounterpart: return "MissingCounterpart";
    case ErrorCode::MixedWeighting: return "MixedWeighting";
    case ErrorCode::MissingDiscipline: return "MissingDiscipline";
    case ErrorCode::WrongSplit: return "WrongSplit";
    case ErrorCode::UnknownBackendRef: return "UnknownBackendRef";
    case ErrorCode::DuplicateBackendId: return "DuplicateBackendId";
    case ErrorCode::InvalidRoleCombination: return "InvalidRoleCombination";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Transport:
    case ErrorCode::RateLimited:
    case ErrorCode::MalformedResponse:
    case ErrorCode::EmptyTranslation:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::UnknownFingerprint:
    case ErrorCode::Io:
      return false;
    default:
      return true;
  }
}

}  // namespace natlan
