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

#include <stdexcept>
#include <string>
#include <string_view>

namespace natlan {

enum class ErrorCode {
  // dataset
  MissingFile,
  MissingDisciplines,
  DuplicateDisciplineId,
  UnknownSubdomain,
  RowParseError,
  MissingGoldLabel,
  IdMismatch,
  GoldMismatch,
  CountMismatch,
  // promptkit
  InsufficientShots,
  EmptyField,
  MissingTranslatedDev,
  // backend
  Transport,
  RateLimited,
  MalformedResponse,
  EmptyTranslation,
  ScriptExhausted,
  UnknownFingerprint,
  UnsupportedOperation,
  // metrics
  MissingGold,
  UnknownDiscipline,
  TableMismatch,
  // activation
  DimensionMismatch,
  NonFiniteValue,
  DuplicateKey,
  ZeroNorm,
  MissingCounterpart,
  // report
  MixedWeighting,
  MissingDiscipline,
  WrongSplit,
  // config
  UnknownBackendRef,
  DuplicateBackendId,
  InvalidRoleCombination,
  ParseError,
  // generic
  Io,
  Usage,
};

std::string_view to_string(ErrorCode code);

// Validation-class errors map to CLI exit status 1, the rest to 2.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error carrying a 1-based line number (CSV rows, config files).
class LineError : public Error {
 public:
  LineError(ErrorCode code, std::size_t line, const std::string& message)
      : Error(code, message + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Backend transport failure with the HTTP status (0 when no response).
class TransportError : public Error {
 public:
  TransportError(ErrorCode code, int status, const std::string& message)
      : Error(code, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace natlan
