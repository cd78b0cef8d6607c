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

#include <filesystem>
#include <fstream>

#include "natlan/codec.hpp"
#include "natlan/error.hpp"
#include "natlan/pipeline.hpp"
#include "natlan/text.hpp"
#include "e2e_support.hpp"
#include "test_util.hpp"

namespace natlan {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::fixture;
using testing::make_discipline;
using testing::make_question;

MethodSpec method(MethodKind kind, std::string speaker, std::optional<std::string> transferor = {}) {
  MethodSpec m;
  m.kind = kind;
  m.speaker = std::move(speaker);
  m.transferor = std::move(transferor);
  return m;
}

std::shared_ptr<MockBackend> mock(std::string id, json script, BackendKind kind = BackendKind::mock) {
  BackendSpec s;
  s.id = std::move(id);
  s.kind = kind;
  s.retry = {2, 0};
  s.max_in_flight = 4;
  return std::make_shared<MockBackend>(s, std::move(script));
}

DatasetBundle fixture_bundle(Split split = Split::val) {
  BundleOptions o;
  o.root = fixture("e2e/data");
  o.registry = fixture("e2e/disciplines.tsv");
  o.split = split;
  return load_bundle(o);
}

BackendRegistry fixture_backends() {
  BackendRegistry r;
  for (const char* id : {"spk", "tr", "tr_clean"}) {
    const std::string file = std::string(id) == "spk" ? "speaker" : std::string(id) == "tr" ? "transferor" : "transferor_clean";
    auto b = mock(id, json::parse(text::read_file(fixture("e2e/mocks/" + file + ".json"))));
    r.add(b);
  }
  r.add(mock("gmt", json::parse(text::read_file(fixture("e2e/mocks/nmt.json")))));
  return r;
}

TEST(MethodSpecTest, RoleLaws) {
  EXPECT_NO_THROW(method(MethodKind::direct, "s").validate());
  EXPECT_THROW(method(MethodKind::direct, "s", "t").validate(), Error);
  EXPECT_THROW(method(MethodKind::natlan, "s").validate(), Error);
  EXPECT_THROW(method(MethodKind::nmt_first, "s").validate(), Error);
  EXPECT_THROW(method(MethodKind::self_translation, "s", "t").validate(), Error);
  EXPECT_NO_THROW(method(MethodKind::self_translation, "s", "s").validate());
  EXPECT_EQ(method(MethodKind::self_translation, "s").transferor_id(), "s");
  EXPECT_EQ(method(MethodKind::self_translation, "s").normalized().transferor, "s");
  try {
    method(MethodKind::natlan, "s").validate();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidRoleCombination);
  }
}

TEST(MethodSpecTest, FingerprintTracksBehaviorOnly) {
  const MethodSpec base = method(MethodKind::natlan, "s", "t");
  MethodSpec named = base;
  named.name = "pretty";
  EXPECT_EQ(base.fingerprint(), named.fingerprint());
  EXPECT_EQ(base.label(), "natlan-s-t");
  EXPECT_EQ(named.label(), "pretty");

  auto differs = [&](auto&& mutate) {
    MethodSpec m = base;
    mutate(m);
    return m.fingerprint() != base.fingerprint();
  };
  EXPECT_TRUE(differs([](MethodSpec& m) { m.cfg.shots = 4; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.cfg.template_version = "v2"; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.transferor = "u"; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.speaker = "x"; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.answer_decoding.max_tokens = 16; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.translation_decoding.temperature = 0.7; }));
  EXPECT_TRUE(differs([](MethodSpec& m) { m.extraction = ExtractionMode::lenient; }));
  EXPECT_FALSE(differs([](MethodSpec& m) { m.from_matrix = true; }));

  EXPECT_EQ(method(MethodKind::self_translation, "s").fingerprint(),
            method(MethodKind::self_translation, "s", "s").fingerprint());
}

TEST(MethodSpecTest, JsonRoundTrip) {
  MethodSpec m = method(MethodKind::nmt_first, "s", "g");
  m.nmt_segmentwise = false;
  m.answer_decoding.stop = {"\n"};
  m.cfg.discipline_name_style = NameStyle::target;
  const MethodSpec back = method_from_json(m.behavior_json());
  EXPECT_EQ(back, m);
  EXPECT_EQ(method_from_json(method(MethodKind::self_translation, "s").behavior_json()),
            method(MethodKind::self_translation, "s"));
}

TEST(CheckRolesTest, BackendKindsMustFitRoles) {
  const std::map<std::string, BackendKind, std::less<>> kinds = {
      {"chat", BackendKind::chat_http}, {"nmt", BackendKind::nmt_http}, {"mock", BackendKind::mock}};
  EXPECT_NO_THROW(check_roles(method(MethodKind::natlan, "chat", "mock"), kinds));
  EXPECT_NO_THROW(check_roles(method(MethodKind::nmt_first, "chat", "nmt"), kinds));
  EXPECT_THROW(check_roles(method(MethodKind::natlan, "chat", "nmt"), kinds), Error);
  EXPECT_THROW(check_roles(method(MethodKind::nmt_first, "chat", "chat"), kinds), Error);
  EXPECT_THROW(check_roles(method(MethodKind::direct, "nmt"), kinds), Error);
  try {
    check_roles(method(MethodKind::natlan, "chat", "ghost"), kinds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownBackendRef);
  }
}

TEST(ParseBlockTest, CanonicalBlock) {
  const ParsedBlock p = parse_question_block(
      "Question:\nWhat is 2+2?\nChoices:\nA. 3\nB. 4\nC. 5\nD. 22\nAnswer:");
  EXPECT_TRUE(p.complete);
  EXPECT_EQ(p.stem, "What is 2+2?");
  EXPECT_EQ(p.choices[1], "4");
  EXPECT_EQ(p.choices[3], "22");
}

TEST(ParseBlockTest, Variants) {
  // no Question: header, CRLF, multi-line stem and choice
  ParsedBlock p = parse_question_block(
      "Line one\r\nline two\r\nChoices:\r\nA. x\r\ncontinued\r\nB. y\r\nC. z\r\nD. w\r\n");
  EXPECT_TRUE(p.complete);
  EXPECT_EQ(p.stem, "Line one\nline two");
  EXPECT_EQ(p.choices[0], "x\ncontinued");

  // no Choices: header, full-width and other markers
  p = parse_question_block("Stem here\nA．one\nB、two\nC) three\nD: four");
  EXPECT_TRUE(p.complete);
  EXPECT_EQ(p.stem, "Stem here");
  EXPECT_EQ(p.choices[3], "four");

  // a stem mentioning "A." mid-line does not start the choices
  p = parse_question_block("Question:\nPick A. or B.\nChoices:\nA. 1\nB. 2\nC. 3\nD. 4\nAnswer: B");
  EXPECT_TRUE(p.complete);
  EXPECT_EQ(p.stem, "Pick A. or B.");
  EXPECT_EQ(p.choices[3], "4");
}

TEST(ParseBlockTest, IncompleteReplies) {
  EXPECT_FALSE(parse_question_block("").complete);
  EXPECT_FALSE(parse_question_block("just prose").complete);
  EXPECT_FALSE(parse_question_block("Q\nA. 1\nB. 2\nC. 3").complete);
  EXPECT_FALSE(parse_question_block("Q\nA. 1\nB. \nC. 3\nD. 4").complete);
  EXPECT_FALSE(parse_question_block("A. 1\nB. 2\nC. 3\nD. 4").complete);  // no stem
}

TEST(TransferCacheTest, PersistsAndSurvivesTornTail) {
  TempDir dir;
  const std::string path = dir.file("cache/transfer.bin");
  TransferredQuestion t{"1", "d1", "stem", {"a", "b", "c", "d"}, "tr", "v1", true, "raw"};
  const std::string key = sha256_hex("k1");
  {
    TransferCache c(path);
    EXPECT_FALSE(c.find(key).has_value());
    c.store(key, t);
    t.stem = "newer";
    c.store(key, t);
    c.store(sha256_hex("k2"), t);
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("\x40\x00\x00\x00partial", 11);
  }
  TransferCache reloaded(path);
  EXPECT_EQ(reloaded.size(), 2u);
  ASSERT_TRUE(reloaded.find(key).has_value());
  EXPECT_EQ(reloaded.find(key)->stem, "newer");
}

TEST(TransferCacheTest, KeyCoversContentAndRoute) {
  const Question q = make_question("1", "stem", Choice::A);
  const MethodSpec m = method(MethodKind::natlan, "s", "t");
  const std::string k = TransferCache::key_for(q, m);
  Question edited = q;
  edited.choices[2] = "changed";
  EXPECT_NE(k, TransferCache::key_for(edited, m));
  EXPECT_NE(k, TransferCache::key_for(q, method(MethodKind::natlan, "s", "u")));
  // the speaker is not part of the transfer
  EXPECT_EQ(k, TransferCache::key_for(q, method(MethodKind::natlan, "x", "t")));
  MethodSpec shots = m;
  shots.cfg.shots = 3;
  EXPECT_NE(k, TransferCache::key_for(q, shots));
  EXPECT_EQ(TransferCache::key_for(q, method(MethodKind::self_translation, "t")), k);
}

TEST(TransferTest, ChatTransferParsesAndCaches) {
  const Discipline d = make_discipline("d1", 5);
  const Question q = make_question("7", "原题七", Choice::C);
  auto tr = mock("tr", json{{"responses", {"Question:\nSeven\nChoices:\nA. a\nB. b\nC. c\nD. d\nAnswer:"}}});
  TransferCache cache;
  const MethodSpec m = method(MethodKind::natlan, "spk", "tr");
  const TransferResult first = transfer_question(q, d, m, *tr, cache);
  EXPECT_FALSE(first.cache_hit);
  EXPECT_TRUE(first.question.parse_ok);
  EXPECT_EQ(first.question.stem, "Seven");
  EXPECT_EQ(first.question.transferor_id, "tr");
  EXPECT_EQ(first.question.template_version, "v1");
  const TransferResult second = transfer_question(q, d, m, *tr, cache);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(second.question, first.question);
  EXPECT_EQ(tr->call_count(), 1u);
  const auto log = tr->request_log();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].payload["decoding"]["max_tokens"], 512);
  EXPECT_EQ(log[0].payload["messages"].size(), 12u);
}

TEST(TransferTest, UnparsableReplyFallsBack) {
  const Discipline d = make_discipline("d1", 5);
  const Question q = make_question("7", "原题七", Choice::C);
  auto tr = mock("tr", json{{"responses", {"  I cannot do that.  "}}});
  TransferCache cache;
  const TransferResult r =
      transfer_question(q, d, method(MethodKind::natlan, "spk", "tr"), *tr, cache);
  EXPECT_FALSE(r.question.parse_ok);
  EXPECT_EQ(r.question.stem, "I cannot do that.");
  EXPECT_EQ(r.question.choices, q.choices);
  EXPECT_EQ(r.question.raw, "  I cannot do that.  ");
}

TEST(TransferTest, NmtSegmentwiseAndJoint) {
  const Discipline d = make_discipline("d1", 5);
  Question q = make_question("1", "题", Choice::A);
  json translations = {{"题", "Q"}};
  for (std::size_t i = 0; i < 4; ++i) translations[q.choices[i]] = std::string("opt") + "ABCD"[i];
  translations["题\nA. " + q.choices[0] + "\nB. " + q.choices[1] + "\nC. " + q.choices[2] + "\nD. " +
               q.choices[3]] = "Q\nA. a\nB. b\nC. c\nD. d";
  auto gmt = mock("gmt", json{{"translations", translations}});
  TransferCache cache;
  MethodSpec m = method(MethodKind::nmt_first, "spk", "gmt");
  const TransferResult seg = transfer_question(q, d, m, *gmt, cache);
  EXPECT_TRUE(seg.question.parse_ok);
  EXPECT_EQ(seg.question.stem, "Q");
  EXPECT_EQ(seg.question.choices[3], "optD");
  EXPECT_EQ(gmt->request_log()[0].payload["q"].size(), 5u);

  m.nmt_segmentwise = false;
  const TransferResult joint = transfer_question(q, d, m, *gmt, cache);
  EXPECT_FALSE(joint.cache_hit);
  EXPECT_TRUE(joint.question.parse_ok);
  EXPECT_EQ(joint.question.choices[2], "c");
}

TEST(AnswerTest, RecordFields) {
  const Discipline d = make_discipline("d1", 5);
  const Question q = make_question("3", "原题", Choice::B);
  auto spk = mock("spk", json{{"responses", {" B ", "The answer is B"}}});
  const MethodSpec m = method(MethodKind::direct, "spk");
  RunRecord r = answer_question(q, std::nullopt, d, m, *spk);
  EXPECT_EQ(r.extracted, Choice::B);
  EXPECT_EQ(r.correct, true);
  EXPECT_EQ(r.raw_answer, " B ");
  EXPECT_EQ(r.method_fingerprint, m.fingerprint());

  r = answer_question(q, std::nullopt, d, m, *spk);
  EXPECT_FALSE(r.extracted.has_value());
  EXPECT_EQ(r.correct, false);

  const auto log = spk->request_log();
  EXPECT_EQ(log[0].payload["decoding"]["max_tokens"], 8);
  EXPECT_EQ(log[0].payload["decoding"]["temperature"], 0.0);
}

TEST(AnswerTest, NativeModeShowsTransferredText) {
  const Discipline d = make_discipline("d1", 5);
  const Question q = make_question("3", "原题", std::nullopt);
  auto spk = mock("spk", json{{"responses", {"A"}}});
  TransferredQuestion t{"3", "d1", "English stem", {"a", "b", "c", "d"}, "tr", "v1", true, ""};
  const RunRecord r = answer_question(q, t, d, method(MethodKind::natlan, "spk", "tr"), *spk);
  EXPECT_FALSE(r.correct.has_value());  // no gold, no correctness
  const json msgs = spk->request_log()[0].payload["messages"];
  EXPECT_NE(msgs.back()["content"].get<std::string>().find("English stem"), std::string::npos);
  EXPECT_NE(msgs[1]["content"].get<std::string>().find("dev 0"), std::string::npos);
}

TEST(RunTest, RecordsAreSortedAndCountsTracked) {
  const DatasetBundle b = fixture_bundle();
  BackendRegistry backends = fixture_backends();
  TransferCache cache;
  MethodSpec m = method(MethodKind::natlan, "spk", "tr");
  const RunResult r = run_method(m, b, backends, cache, {4, ""});
  ASSERT_EQ(r.records.size(), 30u);
  EXPECT_EQ(r.records.front().discipline_id, "computer_network");
  EXPECT_EQ(r.records[9].question_id, "9");
  EXPECT_EQ(r.records[10].discipline_id, "marxism");
  EXPECT_EQ(r.manifest.n_records, 30u);
  EXPECT_EQ(r.manifest.n_failed, 1u);
  EXPECT_EQ(r.manifest.n_parse_failures, 1u);
  EXPECT_EQ(r.manifest.backend_calls.at("tr"), 30u);
  EXPECT_EQ(r.manifest.backend_calls.at("spk"), 29u);
  EXPECT_EQ(r.manifest.template_version, "v1");
  const RunRecord& failed = r.records[20 + 7];
  ASSERT_TRUE(failed.error.has_value());
  EXPECT_EQ(failed.error->rfind("Transport", 0), 0u);
  EXPECT_EQ(failed.correct, false);
}

TEST(RunTest, ConfigurationErrorsComeFirst) {
  DatasetBundle b = fixture_bundle();
  BackendRegistry backends = fixture_backends();
  TransferCache cache;
  EXPECT_THROW(run_method(method(MethodKind::natlan, "spk", "ghost"), b, backends, cache), Error);
  MethodSpec m = method(MethodKind::natlan, "spk", "tr");
  m.cfg.shots = 6;
  try {
    run_method(m, b, backends, cache);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientShots);
  }
  for (Discipline& d : b.disciplines) {
    for (DevExample& ex : d.dev_examples) ex.translated.reset();
  }
  try {
    run_method(method(MethodKind::natlan, "spk", "tr"), b, backends, cache);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTranslatedDev);
  }
  EXPECT_EQ(backends.call_counts().at("spk"), 0u);
  EXPECT_NO_THROW(run_method(method(MethodKind::direct, "spk"), b, backends, cache));
}

TEST(RunTest, WorkerCountDoesNotChangeOutput) {
  const DatasetBundle b = fixture_bundle();
  std::vector<std::string> outputs;
  for (std::size_t workers : {1, 3, 8}) {
    BackendRegistry backends = fixture_backends();
    TransferCache cache;
    const RunResult r = run_method(method(MethodKind::natlan, "spk", "tr"), b, backends, cache,
                                   {workers, ""});
    outputs.push_back(records_to_jsonl(r.records));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(RunTest, BackTranslationUsesTheTransferor) {
  const DatasetBundle b = fixture_bundle();
  BackendRegistry backends;
  backends.add(mock("spk", json{{"mode", "match"}, {"default", "B"}}));
  backends.add(mock("tr", json{{"mode", "match"},
                               {"rules", {{{"contains", "into Chinese"}, {"reply", "乙"}}}},
                               {"default", "Question:\nQ\nChoices:\nA. a\nB. b\nC. c\nD. d\nAnswer:"}}));
  MethodSpec m = method(MethodKind::natlan, "spk", "tr");
  m.back_translate = true;
  TransferCache cache;
  const RunResult r = run_method(m, b, backends, cache);
  EXPECT_EQ(r.records[0].back_translation, "乙");
  EXPECT_EQ(r.manifest.backend_calls.at("tr"), 60u);
}

TEST(RecordsTest, JsonlRoundTrip) {
  RunRecord r;
  r.discipline_id = "d";
  r.question_id = "1";
  r.method_fingerprint = "f";
  r.transferred = TransferredQuestion{"1", "d", "s", {"a", "b", "c", "d"}, "t", "v1", false, "raw"};
  r.raw_answer = "x";
  r.gold = Choice::D;
  r.correct = false;
  r.back_translation = "y";
  r.latency = {5, 7};
  r.error = "Transport: down";
  RunRecord plain;
  plain.discipline_id = "d";
  plain.question_id = "2";
  plain.extracted = Choice::A;
  const std::vector<RunRecord> in = {r, plain};
  EXPECT_EQ(records_from_jsonl(records_to_jsonl(in)), in);
  try {
    records_from_jsonl(to_json(plain).dump() + "\nnot json\n");
    FAIL();
  } catch (const LineError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ManifestTest, RoundTripAndReproducibleTimestamp) {
  ::setenv("SOURCE_DATE_EPOCH", "0", 1);
  EXPECT_EQ(utc_timestamp(), "1970-01-01T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
  RunManifest m;
  m.method_label = "l";
  m.method_fingerprint = "f";
  m.split = Split::test;
  m.backend_calls = {{"a", 3}};
  const RunManifest back = manifest_from_json(to_json(m));
  EXPECT_EQ(back.split, Split::test);
  EXPECT_EQ(back.backend_calls, m.backend_calls);
}


TEST(EndToEndTest, MatchesHandComputedFixture) {
  const json expected = json::parse(text::read_file(fixture("e2e/expected.json")));
  const DatasetBundle b = fixture_bundle();
  const std::pair<const char*, MethodSpec> methods[] = {
      {"direct", method(MethodKind::direct, "spk")},
      {"natlan", method(MethodKind::natlan, "spk", "tr")},
      {"self_translation", method(MethodKind::self_translation, "spk")},
      {"nmt_first", method(MethodKind::nmt_first, "spk", "gmt")}};
  for (const auto& [name, m] : methods) {
    BackendRegistry backends = fixture_backends();
    TransferCache cache;
    const RunResult r = run_method(m, b, backends, cache);
    for (const std::string& miss : testing::e2e_mismatches(expected, name, r.records, b.disciplines)) {
      ADD_FAILURE() << miss;
    }
  }
}

}  // namespace
}  // namespace natlan
