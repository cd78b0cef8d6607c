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

#include <iosfwd>

namespace natlan::cli {

/// Runs one subcommand: validate, translate, run, score, compare,
/// activations. Returns the process exit status (0 ok, 1 validation
/// failure, 2 runtime error). Errors are written to \p err as one JSON line.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace natlan::cli
