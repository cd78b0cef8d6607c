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
#include "natlan/promptkit.hpp"

#include <filesystem>

#include "natlan/codec.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"
#include "templates_embedded.hpp"

namespace fs = std::filesystem;

namespace natlan {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  return std::nullopt;
}

TemplateSet::TemplateSet(std::string version, std::map<std::string, std::string> files)
    : version_(std::move(version)), files_(files.begin(), files.end()) {}

const TemplateSet& TemplateSet::builtin(std::string_view version) {
  static const std::map<std::string, TemplateSet, std::less<>> kSets = [] {
    std::map<std::string, std::map<std::string, std::string>> grouped;
    for (const auto& t : detail::embedded_templates()) {
      grouped[std::string(t.version)][std::string(t.name)] = std::string(t.content);
    }
    std::map<std::string, TemplateSet, std::less<>> sets;
    for (auto& [v, files] : grouped) sets.emplace(v, TemplateSet(v, std::move(files)));
    return sets;
  }();
  auto it = kSets.find(version);
  if (it == kSets.end()) {
    throw Error(ErrorCode::Usage,
                "no built-in templates for version '" + std::string(version) + "'");
  }
  return it->second;
}

TemplateSet TemplateSet::load(const std::string& dir, const std::string& version) {
  const fs::path root = fs::path(dir) / version;
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::MissingFile, "template directory not found: " + root.string());
  }
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.path().extension() != ".txt") continue;
    files[entry.path().stem().string()] = text::read_file(entry.path().string());
  }
  return TemplateSet(version, std::move(files));
}

TemplateSet TemplateSet::resolve(const std::string& dir, const std::string& version) {
  if (!dir.empty() && fs::is_directory(fs::path(dir) / version)) {
    return load(dir, version);
  }
  return builtin(version);
}

const std::string& TemplateSet::get(std::string_view name) const {
  auto it = files_.find(name);
  if (it == files_.end()) {
    throw Error(ErrorCode::MissingFile, "template '" + std::string(name) +
                                            "' missing from version " + version_);
  }
  return it->second;
}

std::string TemplateSet::digest() const {
  std::string material = version_;
  for (const auto& [name, content] : files_) {
    material += '\0' + name + '\0' + std::to_string(content.size()) + '\0' + content;
  }
  return sha256_hex(material);
}

std::string substitute(std::string_view tpl,
                       const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const std::size_t close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(tpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i]);
    ++i;
  }
  return out;
}

namespace {

void require_fields(const Question& q) {
  if (q.stem.empty()) {
    throw Error(ErrorCode::EmptyField, "question " + q.id + " has an empty stem");
  }
  for (Choice c : kChoices) {
    if (q.choice(c).empty()) {
      throw Error(ErrorCode::EmptyField, "question " + q.id + " has an empty choice " +
                                             std::string(1, to_char(c)));
    }
  }
}

void require_shots(std::span<const DevExample> dev, const PromptConfig& cfg,
                   const std::string& discipline_id, bool translated) {
  if (dev.size() < cfg.shots) {
    throw Error(ErrorCode::InsufficientShots,
                discipline_id + ": " + std::to_string(cfg.shots) + " shots requested, " +
                    std::to_string(dev.size()) + " dev examples available");
  }
  if (!translated) return;
  for (std::size_t i = 0; i < cfg.shots; ++i) {
    if (!dev[i].translated) {
      throw Error(ErrorCode::MissingTranslatedDev,
                  discipline_id + ": dev example " + dev[i].original.id +
                      " has no translation");
    }
  }
}

void require_version(const PromptConfig& cfg, const TemplateSet& templates) {
  if (cfg.template_version != templates.version()) {
    throw Error(ErrorCode::Usage, "prompt config wants templates " + cfg.template_version +
                                      ", got " + templates.version());
  }
}

}  // namespace

std::string render_question_block(const Question& q, const TemplateSet& templates) {
  require_fields(q);
  return substitute(templates.get("question_block"),
                    {{"question", q.stem},
                     {"A", q.choices[0]},
                     {"B", q.choices[1]},
                     {"C", q.choices[2]},
                     {"D", q.choices[3]}});
}

std::vector<ChatMessage> build_translation_prompt(const Question& question,
                                                  std::span<const DevExample> dev,
                                                  const PromptConfig& cfg,
                                                  const TemplateSet& templates) {
  require_version(cfg, templates);
  require_shots(dev, cfg, question.discipline_id, true);

  const std::string& user_tpl = templates.get("translation_user");
  const std::string& assistant_tpl = templates.get("translation_assistant");

  std::vector<ChatMessage> messages;
  messages.reserve(2 + 2 * cfg.shots);
  messages.push_back({Role::system, templates.get("translation_system")});
  for (std::size_t i = 0; i < cfg.shots; ++i) {
    messages.push_back(
        {Role::user, substitute(user_tpl, {{"question_block",
                                            render_question_block(dev[i].original, templates)}})});
    messages.push_back(
        {Role::assistant,
         substitute(assistant_tpl,
                    {{"question_block", render_question_block(*dev[i].translated, templates)}})});
  }
  messages.push_back(
      {Role::user,
       substitute(user_tpl, {{"question_block", render_question_block(question, templates)}})});
  return messages;
}

std::vector<ChatMessage> build_qa_prompt(const Question& question,
                                         const Discipline& discipline,
                                         const PromptConfig& cfg, QaMode mode,
                                         const TemplateSet& templates) {
  require_version(cfg, templates);
  const bool native = mode == QaMode::native;
  require_shots(discipline.dev_examples, cfg, discipline.id, native);

  const std::string& name = cfg.discipline_name_style == NameStyle::english
                                ? discipline.name_en
                                : discipline.name_target;
  const std::string& user_tpl = templates.get("qa_user");
  const std::string& assistant_tpl = templates.get("qa_assistant");

  std::vector<ChatMessage> messages;
  messages.reserve(2 + 2 * cfg.shots);
  messages.push_back({Role::system, substitute(templates.get("qa_system"),
                                               {{"discipline", name}})});
  for (std::size_t i = 0; i < cfg.shots; ++i) {
    const DevExample& shot = discipline.dev_examples[i];
    const Question& shown = native ? *shot.translated : shot.original;
    if (!shown.gold) {
      throw Error(ErrorCode::MissingGoldLabel, "dev example " + shown.id + " has no gold");
    }
    messages.push_back(
        {Role::user,
         substitute(user_tpl, {{"question_block", render_question_block(shown, templates)}})});
    messages.push_back({Role::assistant,
                        substitute(assistant_tpl,
                                   {{"answer", std::string(1, to_char(*shown.gold))}})});
  }
  messages.push_back(
      {Role::user,
       substitute(user_tpl, {{"question_block", render_question_block(question, templates)}})});
  return messages;
}

std::vector<ChatMessage> build_back_translation_prompt(std::string_view reply,
                                                       const TemplateSet& templates) {
  if (text::trim(reply).empty()) {
    throw Error(ErrorCode::EmptyField, "nothing to back-translate");
  }
  return {{Role::system, templates.get("translation_system")},
          {Role::user, substitute(templates.get("back_translation_user"),
                                  {{"text", std::string(reply)}})}};
}

}  // namespace natlan
