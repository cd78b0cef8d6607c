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
// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Everything runs against mock backends and checked-in fixtures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "natlan/activation.hpp"
#include "natlan/cli.hpp"
#include "natlan/config.hpp"
#include "natlan/extract.hpp"
#include "natlan/metrics.hpp"
#include "natlan/pipeline.hpp"
#include "natlan/promptkit.hpp"
#include "natlan/report.hpp"
#include "natlan/text.hpp"
#include "../e2e_support.hpp"
#include "../test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace natlan;
using natlan::testing::fixture;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

using Check = std::function<Verdict()>;

struct Criterion {
  std::string name;
  double limit_s;  // 0: no runtime bound
  Check check;
};

std::string render(const std::vector<ChatMessage>& m) { return messages_to_json(m).dump(2) + "\n"; }

Verdict prompt_goldens() {
  Verdict v;
  BundleOptions o;
  o.root = fixture("e2e/data");
  o.registry = fixture("e2e/disciplines.tsv");
  const DatasetBundle b = load_bundle(o);
  const Discipline& d = b.discipline("computer_network");
  const Question& q = b.questions.at("computer_network").front();
  Question en = q;
  en.stem = "Computer Network item 0: which statement is correct?";
  for (std::size_t i = 0; i < 4; ++i) en.choices[i] = "Computer Network item 0 option " + std::string(1, "ABCD"[i]);
  const PromptConfig cfg;
  const std::pair<std::string, std::string> cases[] = {
      {"translation_prompt.json", render(build_translation_prompt(q, d.dev_examples, cfg))},
      {"qa_prompt_target.json", render(build_qa_prompt(q, d, cfg, QaMode::target))},
      {"qa_prompt_native.json", render(build_qa_prompt(en, d, cfg, QaMode::native))}};
  for (const auto& [file, built] : cases) {
    const std::string golden = text::read_file(fixture("golden/" + file));
    if (golden != built) v.fail(file + " differs from the built prompt");
  }
  const std::string tr = text::read_file(fixture("golden/translation_prompt.json"));
  const std::string qa = text::read_file(fixture("golden/qa_prompt_target.json"));
  if (tr.find("You are a professional Chinese-English translator.") == std::string::npos) {
    v.fail("translation golden lacks the translator system line");
  }
  if (qa.find("return one single capital character") == std::string::npos) {
    v.fail("Q&A golden lacks the single-character instruction");
  }
  if (v.ok) v.detail = "3 prompts byte-identical";
  return v;
}

Verdict headline_deltas() {
  Verdict v;
  auto table = [](const char* avg, const char* hard) {
    MetricsTable t;
    t.avg = from_percent(avg);
    t.avg_hard = from_percent(hard);
    return t;
  };
  MethodSpec direct;
  direct.name = "Direct";
  direct.speaker = "Phi-3-mini";
  MethodSpec natlan = direct;
  natlan.name = "NatLan";
  natlan.kind = MethodKind::natlan;
  natlan.transferor = "GPT-3.5";
  const ComparisonDocument doc =
      render_comparison({{direct, table("41.2", "36.3")}, {natlan, table("51.3", "41.3")}});
  const ComparisonRow& row = doc.groups.at(0).rows.at(1);
  const std::string avg = format_signed_percent(row.delta->avg);
  const std::string hard = format_signed_percent(*row.delta->avg_hard);
  if (avg != "+10.1") v.fail("avg delta " + avg);
  if (hard != "+5.0") v.fail("hard delta " + hard);
  if (comparison_markdown(doc).find("51.3 (+10.1) | 41.3 (+5.0)") == std::string::npos) {
    v.fail("markdown row does not show the deltas");
  }
  if (v.ok) v.detail = "avg " + avg + ", hard " + hard;
  return v;
}

const char* const kE2eMethods[] = {"direct", "natlan", "self_translation", "nmt_first"};

Verdict mock_end_to_end() {
  Verdict v;
  const json expected = json::parse(text::read_file(fixture("e2e/expected.json")));
  const ExperimentConfig cfg = load_config(fixture("e2e/config.toml"));
  const DatasetBundle bundle = load_bundle(cfg.dataset);
  natlan::testing::TempDir tmp;
  std::size_t n = 0;
  for (const char* name : kE2eMethods) {
    BackendRegistry backends = build_registry(cfg);
    TransferCache cache;
    const RunResult r = run_method(*cfg.find_method(name), bundle, backends, cache, {cfg.workers, ""});
    // through the on-disk record file, as score would see it
    const std::string path = tmp.file(std::string(name) + ".jsonl");
    text::write_file(path, records_to_jsonl(r.records));
    const std::vector<RunRecord> back = records_from_jsonl(text::read_file(path));
    if (back != r.records) v.fail(std::string(name) + ": records file does not round-trip");
    for (const std::string& m :
         natlan::testing::e2e_mismatches(expected, name, back, bundle.disciplines)) {
      v.fail(m);
    }
    n += back.size();
  }
  if (v.ok) v.detail = std::to_string(n) + " records and 8 metric tables match";
  return v;
}

std::vector<LoggedRequest> speaker_log(const ExperimentConfig& cfg, const DatasetBundle& bundle,
                                       const char* method) {
  BackendRegistry backends = build_registry(cfg);
  TransferCache cache;
  run_method(*cfg.find_method(method), bundle, backends, cache, {1, ""});
  return dynamic_cast<MockBackend&>(backends.get("spk")).request_log();
}

Verdict role_law() {
  Verdict v;
  const ExperimentConfig cfg = load_config(fixture("e2e/config.toml"));
  const DatasetBundle bundle = load_bundle(cfg.dataset);
  const auto same = speaker_log(cfg, bundle, "natlan_same");
  const auto self = speaker_log(cfg, bundle, "self_translation");
  if (same.empty()) v.fail("no requests logged");
  if (same != self) {
    v.fail("request logs differ (" + std::to_string(same.size()) + " vs " +
           std::to_string(self.size()) + " requests)");
  }
  if (v.ok) v.detail = std::to_string(same.size()) + " identical requests";
  return v;
}

int cli(std::vector<std::string> args, std::string* err_out = nullptr) {
  args.insert(args.begin(), "natlan");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_out) *err_out = err.str();
  return code;
}

std::size_t transferor_calls(const std::string& out_dir) {
  const json m = json::parse(text::read_file(out_dir + "/natlan_clean/manifest.json"));
  return m.at("backend_calls").value("tr_clean", std::size_t{0});
}

Verdict cache_contract() {
  Verdict v;
  natlan::testing::TempDir tmp;
  const fs::path root = fs::path(tmp.str()) / "e2e";
  fs::copy(fixture("e2e"), root, fs::copy_options::recursive);
  std::string config = text::read_file((root / "config.toml").string());
  config.replace(config.find("[run]\n"), 6, "[run]\ncache = \"cache/transfer.bin\"\n");
  const std::string cfg_path = (root / "config.toml").string();
  text::write_file(cfg_path, config);
  const std::string cold_out = (root / "cold").string();
  const std::string warm_out = (root / "warm").string();

  std::string err;
  if (cli({"run", "--config", cfg_path, "--methods", "natlan_clean", "--out", cold_out}, &err) != 0) {
    v.fail("cold run failed: " + err);
    return v;
  }
  const std::size_t cold = transferor_calls(cold_out);
  fs::remove(root / "cache/transfer.bin");
  if (cli({"translate", "--config", cfg_path, "--methods", "natlan_clean"}, &err) != 0) {
    v.fail("translate failed: " + err);
    return v;
  }
  if (cli({"run", "--config", cfg_path, "--methods", "natlan_clean", "--out", warm_out}, &err) != 0) {
    v.fail("warm run failed: " + err);
    return v;
  }
  const std::size_t warm = transferor_calls(warm_out);
  if (cold != 30) v.fail("cold run made " + std::to_string(cold) + " transferor calls, expected 30");
  if (warm != 0) v.fail("warm run made " + std::to_string(warm) + " transferor calls");
  if (text::read_file(cold_out + "/natlan_clean/records.jsonl").empty()) v.fail("no records");
  if (v.ok) v.detail = "cold 30 calls for 30 questions, warm 0";
  return v;
}

Verdict minmax_properties() {
  Verdict v;
  std::mt19937_64 rng(20261015);
  std::uniform_int_distribution<int> len(1, 80);
  std::uniform_int_distribution<int> spread(0, 4);
  std::size_t vectors = 0, violations = 0;
  for (int round = 0; round < 1500; ++round) {
    const int n = len(rng);
    const long width = std::vector<long>{0, 1, 3, 50, 5000}[spread(rng)];
    std::uniform_int_distribution<long> val(-width, width);
    MethodDeltas m;
    std::vector<long> d;
    for (int i = 0; i < n; ++i) {
      d.push_back(val(rng));
      m.delta_correct["d" + std::to_string(10000 + i)] = d.back();
    }
    const ImprovementTable t = normalized_relative_improvement({m}, false).at(0);
    ++vectors;
    const long lo = *std::min_element(d.begin(), d.end());
    const long hi = *std::max_element(d.begin(), d.end());
    for (int i = 0; i < n; ++i) {
      const Ratio& x = t.normalized[i];
      if (x < 0 || x > 1) ++violations;
      if (t.delta_correct[i] != d[i]) ++violations;
      if (hi == lo && x != 0) ++violations;
      if (hi > lo && d[i] == lo && x != 0) ++violations;
      if (hi > lo && d[i] == hi && x != 1) ++violations;
      for (int j = 0; j < n; ++j) {
        if (d[i] < d[j] && !(x < t.normalized[j])) ++violations;
        if (d[i] == d[j] && x != t.normalized[j]) ++violations;
      }
    }
  }
  if (violations) v.fail(std::to_string(violations) + " violations");
  if (v.ok) v.detail = std::to_string(vectors) + " vectors, 0 violations";
  return v;
}

std::string fuzz_input(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "A", "B", "C", "D", "E", "a", "b", "c", "d", "AB", "answer", "Answer: ", "The answer is ",
      " ", "\n", "\t", "\r\n", ".", ",", "(", ")", "：", "。", "Ａ", "Ｂ", "ｃ", "答案", "选",
      "是", "1", "_", "x", "\xff", "\xc3", "\xe4\xb8", "\x80", "\0", "é", "𝐀", "**"};
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (byte(rng) < 16) {
      s.push_back(static_cast<char>(byte(rng)));
    } else {
      s += pieces[pick(rng)];
    }
  }
  return s;
}

Verdict extraction_fuzz() {
  Verdict v;
  std::mt19937_64 rng(7);
  std::vector<std::string> inputs = {"", " ", "A", " B\n", "AB", "a", "Ａ", "答案是C", "\xff\xfe"};
  while (inputs.size() < 12000) inputs.push_back(fuzz_input(rng));
  std::size_t subset = 0, shape = 0, strict_hits = 0;
  for (const std::string& s : inputs) {
    const ExtractionOutcome st = extract_choice(s, ExtractionMode::strict);
    const ExtractionOutcome le = extract_choice(s, ExtractionMode::lenient);
    for (const ExtractionOutcome* o : {&st, &le}) {
      if (o->choice.has_value() != o->matched_span.has_value()) ++shape;
      if (o->matched_span && o->matched_span->offset + o->matched_span->length > s.size()) ++shape;
    }
    if (st.choice) {
      ++strict_hits;
      if (le.choice != st.choice) ++subset;
    }
  }
  if (shape) v.fail(std::to_string(shape) + " malformed outcomes");
  if (subset) v.fail(std::to_string(subset) + " strict answers not found by lenient");
  if (strict_hits == 0) v.fail("fuzzer never produced a strict hit");
  if (v.ok) {
    v.detail = std::to_string(inputs.size()) + " inputs, " + std::to_string(strict_hits) +
               " strict hits, 0 violations";
  }
  return v;
}

Verdict activation_oracle() {
  Verdict v;
  std::mt19937_64 rng(16);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_real_distribution<float> scale(1e-3f, 1e3f);
  double worst = 0;
  std::size_t exact_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<float> a(16), b(16);
    const float sa = scale(rng), sb = scale(rng);
    for (float& x : a) x = g(rng) * sa;
    for (float& x : b) x = g(rng) * sb;
    long double dot = 0, na = 0, nb = 0, sq = 0;
    for (int k = 0; k < 16; ++k) {
      dot += static_cast<long double>(a[k]) * b[k];
      na += static_cast<long double>(a[k]) * a[k];
      nb += static_cast<long double>(b[k]) * b[k];
      const long double diff = static_cast<long double>(a[k]) - b[k];
      sq += diff * diff;
    }
    const double cos_ref = static_cast<double>(1 - dot / std::sqrt(na * nb));
    const double l2_ref = static_cast<double>(std::sqrt(sq));
    const double cos = activation_distance(a, b, DistanceMetric::cosine);
    const double l2 = activation_distance(a, b, DistanceMetric::l2);
    worst = std::max({worst, std::abs(cos - cos_ref), std::abs(l2 - l2_ref) / std::max(1.0, l2_ref)});
    if (cos != activation_distance(b, a, DistanceMetric::cosine)) ++exact_violations;
    if (l2 != activation_distance(b, a, DistanceMetric::l2)) ++exact_violations;
    if (activation_distance(a, a, DistanceMetric::cosine) != 0.0) ++exact_violations;
    if (activation_distance(a, a, DistanceMetric::l2) != 0.0) ++exact_violations;
  }
  if (worst > 1e-6) v.fail("max deviation " + std::to_string(worst));
  if (exact_violations) v.fail(std::to_string(exact_violations) + " symmetry/self-distance violations");
  if (v.ok) {
    std::ostringstream s;
    s << "1000 pairs, max deviation " << worst << ", symmetric, zero self-distance";
    v.detail = s.str();
  }
  return v;
}

Verdict aggregation_consistency() {
  Verdict v;
  auto disc = [](const char* id, Subdomain s, bool hard) {
    Discipline d;
    d.id = id;
    d.subdomain = s;
    d.is_hard = hard;
    return d;
  };
  const std::vector<Discipline> reg = {
      disc("s1", Subdomain::STEM, true),         disc("s2", Subdomain::STEM, false),
      disc("s3", Subdomain::STEM, false),        disc("p1", Subdomain::SocialSci, false),
      disc("h1", Subdomain::Humanities, false),  disc("h2", Subdomain::Humanities, true),
      disc("o1", Subdomain::Others, false)};

  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    std::vector<DisciplineScore> scores;
    for (const Discipline& d : reg) {
      scores.push_back({d.id, 20, std::uniform_int_distribution<std::size_t>(0, 20)(rng)});
    }
    const MetricsTable pd = aggregate(scores, reg, Weighting::per_discipline);
    const MetricsTable pq = aggregate(scores, reg, Weighting::per_question);
    if (pd.avg != pq.avg || pd.avg_hard != pq.avg_hard || pd.by_subdomain != pq.by_subdomain) {
      v.fail("equal-count tables disagree in round " + std::to_string(round));
      break;
    }
  }

  // Unequal counts.
  const std::vector<DisciplineScore> unequal = {{"s1", 19, 7},  {"s2", 38, 20}, {"s3", 49, 30},
                                                {"p1", 59, 41}, {"h1", 23, 11}, {"h2", 175, 80},
                                                {"o1", 49, 27}};
  const MetricsTable pd = aggregate(unequal, reg, Weighting::per_discipline);
  const MetricsTable pq = aggregate(unequal, reg, Weighting::per_question);
  if (pd.avg == pq.avg) v.fail("weightings coincide on the unequal fixture");
  for (const MetricsTable* t : {&pd, &pq}) {
    Ratio sub_mean = 0;
    for (const auto& [s, r] : t->by_subdomain) sub_mean += r;
    sub_mean /= t->by_subdomain.size();
    if (sub_mean == t->avg) v.fail("subdomain mean equals the overall avg");
  }
  // Reported row: subdomains 50.6/59.2/45.1/51.7, overall 51.3.
  const Ratio published =
      (from_percent("50.6") + from_percent("59.2") + from_percent("45.1") + from_percent("51.7")) / 4;
  if (published == from_percent("51.3")) {
    v.fail("published subdomain means average to the overall");
  }
  if (v.ok) {
    v.detail = "equal counts agree over 200 tables; unequal: per_discipline " + format_percent(pd.avg) +
               " vs per_question " + format_percent(pq.avg);
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"prompt-goldens", 1.0, prompt_goldens},
      {"headline-deltas", 1.0, headline_deltas},
      {"mock-end-to-end", 5.0, mock_end_to_end},
      {"role-law-equivalence", 0, role_law},
      {"cache-contract", 0, cache_contract},
      {"minmax-normalization", 0, minmax_properties},
      {"extraction-fuzz", 0, extraction_fuzz},
      {"activation-oracle", 0, activation_oracle},
      {"aggregation-consistency", 0, aggregation_consistency},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && s >= c.limit_s) {
      v.fail("took " + std::to_string(s) + " s, limit " + std::to_string(c.limit_s) + " s");
    }
    std::ostringstream time;
    time.precision(3);
    time << std::fixed << s;
    std::cout << (v.ok ? "PASS " : "FAIL ") << c.name << " (" << time.str() << " s): " << v.detail
              << std::endl;
    failed += !v.ok;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
