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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "natlan/backend.hpp"
#include "natlan/dataset.hpp"
#include "natlan/extract.hpp"
#include "natlan/metrics.hpp"
#include "natlan/pipeline.hpp"

namespace natlan {

/// Speaker x transferor x kind grid. Role-incompatible combinations are
/// skipped during expansion.
struct MatrixSpec {
  std::vector<std::string> speakers;
  std::vector<std::string> transferors;
  std::vector<MethodKind> kinds;

  bool operator==(const MatrixSpec&) const = default;
};

struct ExperimentConfig {
  BundleOptions dataset;
  std::vector<BackendSpec> backends;
  std::vector<MethodSpec> methods;  // explicit ones first, then the matrix
  std::optional<MatrixSpec> matrix;

  /// Run-wide method settings ([run] and [decoding]); every method starts
  /// from these. speaker, kind and name are unused.
  MethodSpec method_defaults;

  Split split = Split::val;
  Weighting weighting = Weighting::per_discipline;
  std::string cache_path;  // empty: in-memory only
  std::string out_dir = "out";
  std::string templates_dir;  // empty: built-in templates
  std::size_t workers = 0;
  Choice abstention = Choice::A;

  const MethodSpec* find_method(std::string_view label) const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Reads a TOML config. Relative paths resolve against the directory of
/// the file. Throws ParseError (with a line when known), UnknownBackendRef,
/// DuplicateBackendId or InvalidRoleCombination.
ExperimentConfig load_config(const std::string& path);

/// Same, from text; \p base_dir anchors relative paths.
ExperimentConfig parse_config(std::string_view text, const std::string& base_dir);

/// TOML that parse_config reads back into an equal config. Matrix methods
/// are written as the matrix, not one by one.
std::string serialize_config(const ExperimentConfig& cfg);

/// Instantiates every backend.
BackendRegistry build_registry(const ExperimentConfig& cfg);

/// Methods named in \p labels (all when empty). Throws Usage for an
/// unknown label.
std::vector<MethodSpec> select_methods(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& labels);

}  // namespace natlan
