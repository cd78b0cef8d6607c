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
#include "natlan/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "natlan/activation.hpp"
#include "natlan/config.hpp"
#include "natlan/csv.hpp"
#include "natlan/error.hpp"
#include "natlan/metrics.hpp"
#include "natlan/pipeline.hpp"
#include "natlan/report.hpp"
#include "natlan/text.hpp"

namespace natlan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string split;
  std::string methods;
  std::string out;
  std::string extraction;
  std::string weighting;
  std::vector<std::string> metrics_files;
  std::string dump;
  std::string pairs;
};

// flock()-based advisory lock on <dir>/.natlan.lock, released on close.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) {
    fs::create_directories(dir);
    const std::string path = (fs::path(dir) / ".natlan.lock").string();
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::Io, "cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::Io, "output directory " + dir + " is in use by another invocation");
    }
  }
  ~DirLock() { ::close(fd_); }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<std::string> comma_list(const std::string& s) {
  std::vector<std::string> out;
  for (std::string_view item : text::split(s, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

ExperimentConfig load_with_overrides(const Options& o) {
  if (o.config.empty()) throw Error(ErrorCode::Usage, "--config is required");
  ExperimentConfig cfg = load_config(o.config);
  if (!o.split.empty()) {
    const auto split = parse_split(o.split);
    if (!split) throw Error(ErrorCode::Usage, "unknown split " + o.split);
    cfg.split = *split;
    cfg.dataset.split = *split;
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.weighting.empty()) {
    const auto w = parse_weighting(o.weighting);
    if (!w) throw Error(ErrorCode::Usage, "unknown weighting " + o.weighting);
    cfg.weighting = *w;
  }
  if (!o.extraction.empty()) {
    const auto e = parse_extraction_mode(o.extraction);
    if (!e) throw Error(ErrorCode::Usage, "unknown extraction mode " + o.extraction);
    cfg.method_defaults.extraction = *e;
    for (MethodSpec& m : cfg.methods) m.extraction = *e;
  }
  return cfg;
}

std::vector<MethodSpec> selected(const ExperimentConfig& cfg, const Options& o) {
  std::vector<MethodSpec> methods = select_methods(cfg, comma_list(o.methods));
  if (methods.empty()) throw Error(ErrorCode::Usage, "the config defines no methods");
  return methods;
}

std::string method_dir(const ExperimentConfig& cfg, const MethodSpec& m) {
  return (fs::path(cfg.out_dir) / m.label()).string();
}

std::string speaker_language(const MethodSpec& m) {
  return m.uses_transfer() ? m.native_language : m.target_language;
}

std::vector<Discipline> registry_for(const ExperimentConfig& cfg) {
  std::vector<Discipline> all = load_discipline_registry(cfg.dataset.registry);
  if (cfg.dataset.only.empty()) return all;
  std::vector<Discipline> out;
  for (const std::string& id : cfg.dataset.only) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Discipline& d) { return d.id == id; });
    if (it == all.end()) throw Error(ErrorCode::UnknownDiscipline, "unknown discipline " + id);
    out.push_back(*it);
  }
  return out;
}

// --- subcommands -------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_with_overrides(o);
  ValidationReport report = validate_dataset(cfg.dataset);

  const std::vector<MethodSpec> methods = selected(cfg, o);
  try {
    build_registry(cfg);
  } catch (const Error& e) {
    report.issues.push_back({ValidationIssue::Severity::error, "",
                             std::string(to_string(e.code())) + ": " + e.what()});
  }
  bool any_transfer = false;
  for (const MethodSpec& m : methods) any_transfer = any_transfer || m.uses_transfer();
  if (any_transfer) {
    try {
      const DatasetBundle bundle = load_bundle(cfg.dataset);
      for (const Discipline& d : bundle.disciplines) {
        if (!d.has_translated_dev()) {
          report.issues.push_back({ValidationIssue::Severity::error, d.id,
                                   "native-language methods need translated dev examples"});
        }
      }
    } catch (const Error&) {
      // already reported by validate_dataset
    }
  }

  json issues = json::array();
  std::size_t errors = 0;
  for (const ValidationIssue& i : report.issues) {
    const bool is_error = i.severity == ValidationIssue::Severity::error;
    errors += is_error;
    issues.push_back({{"severity", is_error ? "error" : "warning"},
                      {"discipline", i.discipline_id},
                      {"message", i.message}});
  }
  json counts = json::object();
  for (const auto& [split, n] : report.question_counts) counts[std::string(to_string(split))] = n;
  std::vector<std::string> labels;
  for (const MethodSpec& m : methods) labels.push_back(m.label());
  const json doc = {{"ok", errors == 0},
                    {"disciplines", report.disciplines},
                    {"questions", counts},
                    {"backends", cfg.backends.size()},
                    {"methods", labels},
                    {"issues", issues}};
  out << doc.dump(2) << '\n';
  if (errors) err << "validate: " << errors << " error(s)\n";
  return errors == 0 ? 0 : 1;
}

int cmd_translate(const Options& o, std::ostream&, std::ostream& err) {
  const ExperimentConfig cfg = load_with_overrides(o);
  if (cfg.cache_path.empty()) {
    throw Error(ErrorCode::Usage, "translate needs run.cache so the warmed cache persists");
  }
  const std::vector<MethodSpec> methods = selected(cfg, o);
  BackendRegistry backends = build_registry(cfg);
  const DatasetBundle bundle = load_bundle(cfg.dataset);
  TransferCache cache(cfg.cache_path);
  RunOptions options{cfg.workers, cfg.templates_dir};
  std::size_t failed = 0;
  for (const MethodSpec& m : methods) {
    if (!m.uses_transfer()) continue;
    const WarmResult r = warm_transfers(m, bundle, backends, cache, options);
    failed += r.failed;
    err << "translate " << m.label() << ": " << r.transferred << " transferred, " << r.cache_hits
        << " cached, " << r.failed << " failed\n";
  }
  return failed ? 2 : 0;
}

int cmd_run(const Options& o, std::ostream&, std::ostream& err) {
  const ExperimentConfig cfg = load_with_overrides(o);
  const std::vector<MethodSpec> methods = selected(cfg, o);
  BackendRegistry backends = build_registry(cfg);
  for (const MethodSpec& m : methods) check_roles(m, backends);
  const DatasetBundle bundle = load_bundle(cfg.dataset);
  DirLock lock(cfg.out_dir);
  TransferCache cache(cfg.cache_path);
  RunOptions options{cfg.workers, cfg.templates_dir};

  for (const MethodSpec& m : methods) {
    const RunResult result = run_method(m, bundle, backends, cache, options);
    const std::string dir = method_dir(cfg, m);
    text::write_file((fs::path(dir) / "records.jsonl").string(), records_to_jsonl(result.records));
    text::write_file((fs::path(dir) / "manifest.json").string(),
                     to_json(result.manifest).dump(2) + "\n");
    if (cfg.split == Split::test) {
      std::vector<std::string> ids;
      for (const Discipline& d : bundle.disciplines) ids.push_back(d.id);
      const Submission sub = emit_submission(result.records, cfg.split, ids, cfg.abstention);
      text::write_file((fs::path(dir) / "submission.json").string(), sub.answers.dump(2) + "\n");
      std::string audit;
      for (const std::string& line : sub.audit) audit += line + "\n";
      text::write_file((fs::path(dir) / "submission_audit.txt").string(), audit);
    }
    err << "run " << m.label() << ": " << result.manifest.n_records << " records, "
        << result.manifest.n_failed << " failed, " << result.manifest.cache_hits
        << " transfer cache hits\n";
  }
  return 0;
}

json stored_metrics(const MethodSpec& m, const MetricsTable& t) {
  return {{"label", m.label()},
          {"name", m.name},
          {"method_fingerprint", m.fingerprint()},
          {"method", m.behavior_json()},
          {"table", to_json(t)}};
}

int cmd_score(const Options& o, std::ostream&, std::ostream& err) {
  const ExperimentConfig cfg = load_with_overrides(o);
  const std::vector<MethodSpec> methods = selected(cfg, o);
  const std::vector<Discipline> registry = registry_for(cfg);
  DirLock lock(cfg.out_dir);

  std::string summary_csv = metrics_csv_header() + ",Method\n";
  for (const MethodSpec& m : methods) {
    const std::string dir = method_dir(cfg, m);
    const std::vector<RunRecord> records =
        records_from_jsonl(text::read_file((fs::path(dir) / "records.jsonl").string()));
    std::vector<std::string> warnings;
    const std::vector<DisciplineScore> scores = score(records, registry, &warnings);
    for (const std::string& w : warnings) err << "score " << m.label() << ": " << w << "\n";
    const MetricsTable table = aggregate(scores, registry, cfg.weighting);
    text::write_file((fs::path(dir) / "metrics.json").string(),
                     stored_metrics(m, table).dump(2) + "\n");
    text::write_file((fs::path(dir) / "disciplines.csv").string(), discipline_scores_csv(scores));
    summary_csv += metrics_csv_row(table, m.speaker, speaker_language(m)) + "," +
           csv::escape(m.label()) + "\n";
    err << "score " << m.label() << ": avg " << format_percent(table.avg) << "\n";
  }
  text::write_file((fs::path(cfg.out_dir) / "metrics.csv").string(), summary_csv);
  return 0;
}

RunSet load_stored_metrics(const std::string& path) {
  const json j = json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::ParseError, path + ": not a JSON object");
  }
  try {
    return {method_from_json(j.at("method"), j.value("name", std::string())),
            metrics_from_json(j.at("table"))};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

int cmd_compare(const Options& o, std::ostream&, std::ostream& err) {
  std::vector<RunSet> sets;
  std::string out_dir = o.out;
  if (!o.metrics_files.empty()) {
    for (const std::string& path : o.metrics_files) sets.push_back(load_stored_metrics(path));
  } else {
    const ExperimentConfig cfg = load_with_overrides(o);
    if (out_dir.empty()) out_dir = cfg.out_dir;
    for (const MethodSpec& m : selected(cfg, o)) {
      sets.push_back(load_stored_metrics((fs::path(method_dir(cfg, m)) / "metrics.json").string()));
    }
  }
  if (out_dir.empty()) throw Error(ErrorCode::Usage, "compare needs --out or --config");
  DirLock lock(out_dir);

  const ComparisonDocument doc = render_comparison(sets);

  // Normalized improvements per speaker group, against its direct baseline.
  std::vector<ImprovementTable> tables;
  std::vector<std::string> labels;
  std::vector<std::string> speakers;
  for (const RunSet& rs : sets) {
    if (std::find(speakers.begin(), speakers.end(), rs.first.speaker) == speakers.end()) {
      speakers.push_back(rs.first.speaker);
    }
  }
  for (const std::string& speaker : speakers) {
    const RunSet* base = nullptr;
    for (const RunSet& rs : sets) {
      if (rs.first.speaker == speaker && rs.first.kind == MethodKind::direct) {
        base = &rs;
        break;
      }
    }
    if (!base || base->second.scores.empty()) continue;
    std::vector<MethodDeltas> deltas;
    std::vector<std::string> group_labels;
    for (const RunSet& rs : sets) {
      if (&rs == base || rs.first.speaker != speaker || rs.second.scores.empty()) continue;
      deltas.push_back({rs.first.fingerprint(), base->first.fingerprint(),
                        delta_correct(rs.second.scores, base->second.scores)});
      group_labels.push_back(rs.first.label());
    }
    for (ImprovementTable& t : normalized_relative_improvement(deltas)) tables.push_back(std::move(t));
    labels.insert(labels.end(), group_labels.begin(), group_labels.end());
  }

  const fs::path dir(out_dir);
  text::write_file((dir / "comparison.csv").string(), comparison_csv(doc));
  text::write_file((dir / "comparison.md").string(), comparison_markdown(doc));
  text::write_file((dir / "comparison.json").string(), to_json(doc).dump(2) + "\n");
  text::write_file((dir / "improvements.csv").string(), improvements_csv(tables, labels));
  for (const ComparisonGroup& g : doc.groups) {
    for (const ComparisonRow& r : g.rows) {
      err << "compare " << r.method_label << ": " << format_percent(r.avg);
      if (r.delta) err << " (" << format_signed_percent(r.delta->avg) << ")";
      err << " " << to_string(r.enhancement) << "\n";
    }
  }
  return 0;
}

int cmd_activations(const Options& o, std::ostream&, std::ostream& err) {
  if (o.dump.empty() || o.pairs.empty() || o.out.empty()) {
    throw Error(ErrorCode::Usage, "activations needs --dump, --pairs and --out");
  }
  const ActivationDump dump = load_activations(o.dump);
  const DiffSummary summary = diff_summary(dump.records, parse_pairs(o.pairs));
  DirLock lock(o.out);
  const fs::path dir(o.out);
  text::write_file((dir / "diffs.csv").string(), diffs_csv(summary));
  text::write_file((dir / "summary.json").string(), to_json(summary).dump(2) + "\n");
  text::write_file((dir / "matrix.actv").string(), export_matrix(dump.records));
  err << "activations: " << dump.records.size() << " vectors, d=" << dump.dim << ", "
      << summary.diffs.size() << " diffs\n";
  return 0;
}

void report_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Native-language prompting evaluation harness", "natlan"};
  app.require_subcommand(1, 1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", o.config, "experiment config (TOML)");
    sub->add_option("--split", o.split, "dev, val or test");
    sub->add_option("--methods", o.methods, "comma-separated method labels");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--extraction", o.extraction, "strict or lenient");
    sub->add_option("--weighting", o.weighting, "per_discipline or per_question");
  };
  CLI::App* validate = app.add_subcommand("validate", "check the dataset and config");
  CLI::App* translate = app.add_subcommand("translate", "warm the transfer cache");
  CLI::App* run = app.add_subcommand("run", "answer every question with each method");
  CLI::App* score_cmd = app.add_subcommand("score", "compute metrics from stored records");
  CLI::App* compare = app.add_subcommand("compare", "comparison and improvement tables");
  CLI::App* activations = app.add_subcommand("activations", "activation differences over a dump");
  for (CLI::App* sub : {validate, translate, run, score_cmd, compare}) common(sub, true);
  compare->add_option("--metrics", o.metrics_files, "stored metrics.json files (no config needed)");
  activations->add_option("--dump", o.dump, "ACTV1 dump")->required();
  activations->add_option("--pairs", o.pairs, "method pairs, e.g. direct:natlan")->required();
  activations->add_option("--out", o.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    report_error(err, "Usage", e.what());
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out, err);
    if (translate->parsed()) return cmd_translate(o, out, err);
    if (run->parsed()) return cmd_run(o, out, err);
    if (score_cmd->parsed()) return cmd_score(o, out, err);
    if (compare->parsed()) return cmd_compare(o, out, err);
    return cmd_activations(o, out, err);
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return 2;
  }
}

}  // namespace natlan::cli
