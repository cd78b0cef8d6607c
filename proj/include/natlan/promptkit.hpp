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

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "natlan/dataset.hpp"

namespace natlan {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

enum class NameStyle { english, target };

struct PromptConfig {
  std::size_t shots = 5;
  std::string template_version = "v1";
  NameStyle discipline_name_style = NameStyle::english;

  bool operator==(const PromptConfig&) const = default;
};

/// Which dev rendering the Q&A shots exhibit: translated (native) or
/// original (target, the direct baseline).
enum class QaMode { native, target };

/// A named set of prompt templates. Placeholders are {name} tokens
/// substituted in a single pass; substituted text is never rescanned, and
/// braces that do not name a known placeholder are kept literally.
class TemplateSet {
 public:
  /// The compiled-in set for \p version ("v1" ships with the library).
  static const TemplateSet& builtin(std::string_view version = "v1");

  /// Loads {dir}/{version}/*.txt. Missing files fall back to nothing: every
  /// template used by the builders must be present.
  static TemplateSet load(const std::string& dir, const std::string& version);

  /// Builtin when \p dir is empty or has no {dir}/{version}; else load().
  static TemplateSet resolve(const std::string& dir, const std::string& version);

  TemplateSet(std::string version, std::map<std::string, std::string> files);

  const std::string& version() const { return version_; }
  const std::string& get(std::string_view name) const;

  /// Stable digest of every template file, for cache keys and manifests.
  std::string digest() const;

 private:
  std::string version_;
  std::map<std::string, std::string, std::less<>> files_;
};

std::string substitute(std::string_view tpl,
                       const std::map<std::string, std::string, std::less<>>& values);

/// Question:/Choices:/A. ../Answer: block for \p q.
std::string render_question_block(const Question& q, const TemplateSet& templates);

/// [system] + shots x (user original, assistant translated) + user query.
std::vector<ChatMessage> build_translation_prompt(
    const Question& question, std::span<const DevExample> dev,
    const PromptConfig& cfg,
    const TemplateSet& templates = TemplateSet::builtin());

/// [system naming the discipline] + shots x (user block, assistant letter)
/// + user query block ending in "Answer:".
std::vector<ChatMessage> build_qa_prompt(
    const Question& question, const Discipline& discipline,
    const PromptConfig& cfg, QaMode mode,
    const TemplateSet& templates = TemplateSet::builtin());

/// Optional post-stage: asks the transferor to render a speaker reply back
/// into the target language.
std::vector<ChatMessage> build_back_translation_prompt(
    std::string_view reply, const TemplateSet& templates = TemplateSet::builtin());

}  // namespace natlan
