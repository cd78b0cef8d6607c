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
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "natlan/activation.hpp"
#include "natlan/cli.hpp"
#include "natlan/pipeline.hpp"
#include "natlan/text.hpp"
#include "test_util.hpp"

namespace natlan {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;
using testing::fixture;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome natlan(std::vector<std::string> args) {
  args.insert(args.begin(), "natlan");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Fixture config copied next to a scratch directory, with absolute data paths.
std::string scratch_config(const TempDir& dir, const std::string& extra_run = "") {
  std::string text = text::read_file(fixture("e2e/config.toml"));
  const std::string e2e = fixture("e2e");
  auto replace = [&](const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
  };
  replace("root = \"data\"", "root = \"" + e2e + "/data\"");
  replace("registry = \"disciplines.tsv\"", "registry = \"" + e2e + "/disciplines.tsv\"");
  replace("[run]\n", "[run]\n" + extra_run);
  for (const char* m : {"speaker", "transferor", "transferor_clean", "nmt"}) {
    const std::string rel = std::string("\"mocks/") + m + ".json\"";
    replace(rel, "\"" + e2e + "/mocks/" + m + ".json\"");
  }
  const std::string path = dir.file("config.toml");
  text::write_file(path, text);
  return path;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST(CliTest, UsageErrors) {
  Outcome o = natlan({});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("\"error\":\"Usage\""), std::string::npos);
  EXPECT_EQ(natlan({"frobnicate"}).code, 1);
  EXPECT_EQ(natlan({"--help"}).code, 0);
  o = natlan({"run"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("--config"), std::string::npos);
  EXPECT_EQ(natlan({"run", "--config", "/nonexistent/config.toml"}).code, 1);
  EXPECT_EQ(natlan({"activations", "--dump", "x"}).code, 1);
}

TEST(CliTest, ValidateReportsAsJson) {
  TempDir dir;
  Outcome o = natlan({"validate", "--config", scratch_config(dir)});
  EXPECT_EQ(o.code, 0) << o.err;
  const json report = json::parse(o.out);
  EXPECT_EQ(report["ok"], true);
  EXPECT_EQ(report["disciplines"], 3);
  EXPECT_EQ(report["questions"]["val"], 30);
  EXPECT_EQ(report["methods"].size(), 6u);
}

TEST(CliTest, RunScoreCompareOnVal) {
  TempDir dir;
  const std::string cfg = scratch_config(dir);
  const std::string out = dir.file("out");
  Outcome o = natlan({"run", "--config", cfg, "--methods", "direct,natlan", "--out", out});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string records = text::read_file(out + "/natlan/records.jsonl");
  EXPECT_EQ(line_count(records), 30u);
  const json manifest = json::parse(text::read_file(out + "/natlan/manifest.json"));
  EXPECT_EQ(manifest["n_failed"], 1);
  EXPECT_FALSE(fs::exists(out + "/natlan/submission.json"));

  o = natlan({"score", "--config", cfg, "--methods", "direct,natlan", "--out", out});
  ASSERT_EQ(o.code, 0) << o.err;
  const json metrics = json::parse(text::read_file(out + "/direct/metrics.json"));
  EXPECT_EQ(metrics["table"]["avg"]["exact"], "11/30");
  EXPECT_EQ(metrics["label"], "direct");
  const std::string summary = text::read_file(out + "/metrics.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')),
            "Model,Lang.,STEM,Social Sci.,Human.,Others,Avg.,Avg. (Hard),Method");
  EXPECT_NE(summary.find("spk,zh,"), std::string::npos);

  o = natlan({"compare", "--config", cfg, "--methods", "direct,natlan", "--out", out});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string cmp = text::read_file(out + "/comparison.csv");
  EXPECT_NE(cmp.find("spk,natlan,en,"), std::string::npos) << cmp;
  EXPECT_NE(cmp.find("+33.3"), std::string::npos) << cmp;
  EXPECT_TRUE(fs::exists(out + "/comparison.md"));
  EXPECT_TRUE(fs::exists(out + "/improvements.csv"));
}

TEST(CliTest, TestSplitEmitsSubmission) {
  TempDir dir;
  const std::string cfg = scratch_config(dir);
  const std::string out = dir.file("out");
  Outcome o = natlan({"run", "--config", cfg, "--split", "test", "--methods", "direct", "--out", out});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(line_count(text::read_file(out + "/direct/records.jsonl")), 6u);
  const json sub = json::parse(text::read_file(out + "/direct/submission.json"));
  EXPECT_EQ(sub.size(), 3u);
  EXPECT_EQ(sub["marxism"].size(), 2u);

  o = natlan({"score", "--config", cfg, "--split", "test", "--methods", "direct", "--out", out});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("MissingGold"), std::string::npos);
}

TEST(CliTest, TranslateWarmsThePersistentCache) {
  TempDir dir;
  EXPECT_EQ(natlan({"translate", "--config", scratch_config(dir), "--methods", "natlan_clean"}).code,
            1);  // no cache configured
  const std::string cfg = scratch_config(dir, "cache = \"" + dir.file("cache.bin") + "\"\n");
  Outcome o = natlan({"translate", "--config", cfg, "--methods", "natlan_clean"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.err.find("30 transferred"), std::string::npos) << o.err;
  o = natlan({"translate", "--config", cfg, "--methods", "natlan_clean"});
  EXPECT_NE(o.err.find("30 cached"), std::string::npos) << o.err;
  o = natlan({"translate", "--config", cfg, "--methods", "natlan"});
  EXPECT_EQ(o.code, 2);  // the scripted HTTP 500
}

TEST(CliTest, CompareFromStoredMetricsOnly) {
  TempDir dir;
  auto stored = [&](const std::string& name, MethodKind kind, const char* avg, const char* hard) {
    MethodSpec m;
    m.name = name;
    m.kind = kind;
    m.speaker = "Phi-3-mini";
    if (kind != MethodKind::direct) m.transferor = "GPT-3.5";
    const json j = {{"label", name},
                    {"name", name},
                    {"method", m.behavior_json()},
                    {"table",
                     {{"weighting", "per_discipline"},
                      {"scores", json::array()},
                      {"avg", {{"percent", avg}}},
                      {"avg_hard", {{"percent", hard}}},
                      {"by_subdomain", json::object()}}}};
    const std::string path = dir.file(name + ".json");
    text::write_file(path, j.dump());
    return path;
  };
  const std::string a = stored("Direct", MethodKind::direct, "41.2", "36.3");
  const std::string b = stored("NatLan", MethodKind::natlan, "51.3", "41.3");
  Outcome o = natlan({"compare", "--metrics", a, "--metrics", b, "--out", dir.file("cmp")});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string md = text::read_file(dir.file("cmp/comparison.md"));
  EXPECT_NE(md.find("51.3 (+10.1)"), std::string::npos) << md;
  EXPECT_NE(md.find("41.3 (+5.0)"), std::string::npos) << md;
}

TEST(CliTest, Activations) {
  TempDir dir;
  Outcome o = natlan({"activations", "--dump", fixture("actv1/python_dump.actv"), "--pairs",
                      "direct:natlan,direct:self_translation", "--out", dir.file("act")});
  ASSERT_EQ(o.code, 0) << o.err;
  const json summary = json::parse(text::read_file(dir.file("act/summary.json")));
  ASSERT_EQ(summary["pairs"].size(), 2u);
  EXPECT_EQ(summary["pairs"][0]["n"], 25);
  EXPECT_EQ(line_count(text::read_file(dir.file("act/diffs.csv"))), 51u);
  EXPECT_EQ(parse_activations(text::read_file(dir.file("act/matrix.actv"))).records.size(), 100u);

  o = natlan({"activations", "--dump", fixture("actv1/python_dump.actv"), "--pairs", "direct:ghost",
              "--out", dir.file("act2")});
  EXPECT_EQ(o.code, 1);
}

}  // namespace
}  // namespace natlan
