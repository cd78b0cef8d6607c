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
#include "natlan/activation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <set>

#include <Eigen/Core>

#include "natlan/codec.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"

namespace natlan {

namespace {

std::vector<float> decode_floats(std::span<const std::uint8_t> bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

std::vector<std::uint8_t> encode_floats(const std::vector<float>& v) {
  std::vector<std::uint8_t> out(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &v[i], 4);
    for (std::size_t b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

std::optional<std::size_t> header_field(std::string_view token, std::string_view key) {
  if (!token.starts_with(key)) return std::nullopt;
  token.remove_prefix(key.size());
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

bool bad_id(std::string_view id) {
  return id.empty() || id.find_first_of("\t\r\n") != std::string_view::npos;
}

void check_record(const ActivationRecord& r, std::size_t dim, std::size_t line,
                  std::set<std::pair<std::string, std::string>>& seen) {
  if (r.vector.size() != dim) {
    throw LineError(ErrorCode::DimensionMismatch, line,
                    "vector has " + std::to_string(r.vector.size()) + " values, expected " +
                        std::to_string(dim));
  }
  if (!std::all_of(r.vector.begin(), r.vector.end(), [](float x) { return std::isfinite(x); })) {
    throw LineError(ErrorCode::NonFiniteValue, line,
                    r.question_id + "/" + r.method_id + " has a non-finite value");
  }
  if (!seen.emplace(r.question_id, r.method_id).second) {
    throw LineError(ErrorCode::DuplicateKey, line,
                    "duplicate key " + r.question_id + "/" + r.method_id);
  }
}

}  // namespace

ActivationDump parse_activations(std::string_view data) {
  std::vector<std::string_view> lines = text::split(data, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw LineError(ErrorCode::ParseError, 1, "empty activation dump");

  std::string_view header = lines[0];
  if (header.ends_with('\r')) header.remove_suffix(1);
  const std::vector<std::string_view> tokens = text::split(header, ' ');
  std::optional<std::size_t> dim, count;
  if (tokens.size() == 3 && tokens[0] == "ACTV1") {
    dim = header_field(tokens[1], "d=");
    count = header_field(tokens[2], "n=");
  }
  if (!dim || !count || *dim == 0) {
    throw LineError(ErrorCode::ParseError, 1, "expected 'ACTV1 d=<dim> n=<count>'");
  }

  ActivationDump dump;
  dump.dim = *dim;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.ends_with('\r')) line.remove_suffix(1);
    const std::vector<std::string_view> cols = text::split(line, '\t');
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      throw LineError(ErrorCode::ParseError, i + 1, "expected question_id, method_id, vector");
    }
    const auto bytes = base64_decode(cols[2]);
    if (!bytes) throw LineError(ErrorCode::ParseError, i + 1, "vector is not valid base64");
    if (bytes->size() % 4 != 0) {
      throw LineError(ErrorCode::DimensionMismatch, i + 1, "vector is not a whole number of floats");
    }
    ActivationRecord r{std::string(cols[0]), std::string(cols[1]), decode_floats(*bytes)};
    check_record(r, dump.dim, i + 1, seen);
    dump.records.push_back(std::move(r));
  }
  if (dump.records.size() != *count) {
    throw LineError(ErrorCode::ParseError, 1,
                    "header announces " + std::to_string(*count) + " records, found " +
                        std::to_string(dump.records.size()));
  }
  return dump;
}

ActivationDump load_activations(const std::string& path) {
  return parse_activations(text::read_file(path));
}

std::string serialize_activations(const std::vector<ActivationRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::DimensionMismatch, "no records to serialize");
  const std::size_t dim = records.front().vector.size();
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional vectors");
  std::string out = "ACTV1 d=" + std::to_string(dim) + " n=" + std::to_string(records.size()) + "\n";
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ActivationRecord& r = records[i];
    if (bad_id(r.question_id) || bad_id(r.method_id)) {
      throw LineError(ErrorCode::ParseError, i + 2, "ids must be non-empty without tabs or newlines");
    }
    check_record(r, dim, i + 2, seen);
    out += r.question_id;
    out += '\t';
    out += r.method_id;
    out += '\t';
    out += base64_encode(encode_floats(r.vector));
    out += '\n';
  }
  return out;
}

void write_activations(const std::string& path, const std::vector<ActivationRecord>& records) {
  text::write_file(path, serialize_activations(records));
}

std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::cosine ? "cosine" : "l2";
}

std::optional<DistanceMetric> parse_metric(std::string_view s) {
  if (s == "cosine") return DistanceMetric::cosine;
  if (s == "l2") return DistanceMetric::l2;
  return std::nullopt;
}

double activation_distance(std::span<const float> a, std::span<const float> b,
                           DistanceMetric metric) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vectors of dimension " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
  }
  const auto n = static_cast<Eigen::Index>(a.size());
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXf>(a.data(), n).cast<double>();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXf>(b.data(), n).cast<double>();
  if (metric == DistanceMetric::l2) return (x - y).norm();

  const double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw Error(ErrorCode::ZeroNorm, "cosine distance of a zero vector");
  // Rounding can leave identical inputs a hair away from zero.
  if (std::equal(a.begin(), a.end(), b.begin())) return 0.0;
  return std::clamp(1.0 - x.dot(y) / (nx * ny), 0.0, 2.0);
}

namespace {

Stats stats_of(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2;
  s.max = v.back();
  return s;
}

}  // namespace

DiffSummary diff_summary(const std::vector<ActivationRecord>& records,
                         const std::vector<MethodPair>& pairs) {
  // method -> question -> record
  std::map<std::string, std::map<std::string, const ActivationRecord*>> index;
  for (const ActivationRecord& r : records) index[r.method_id][r.question_id] = &r;

  DiffSummary out;
  for (const auto& [ma, mb] : pairs) {
    const auto& qa = index[ma];
    const auto& qb = index[mb];
    std::vector<std::string> questions;
    for (const auto& [q, _] : qa) questions.push_back(q);
    for (const auto& [q, _] : qb) {
      if (!qa.contains(q)) questions.push_back(q);
    }
    std::sort(questions.begin(), questions.end(), text::id_less);

    PairSummary summary{ma, mb, 0, {}, {}};
    std::vector<double> cos, l2;
    for (const std::string& q : questions) {
      auto ia = qa.find(q);
      auto ib = qb.find(q);
      if (ia == qa.end() || ib == qb.end()) {
        const std::string& missing = ia == qa.end() ? ma : mb;
        throw Error(ErrorCode::MissingCounterpart,
                    "question " + q + " has no activation for method " + missing);
      }
      ActivationDiff d{q, ma, mb,
                       activation_distance(ia->second->vector, ib->second->vector,
                                           DistanceMetric::cosine),
                       activation_distance(ia->second->vector, ib->second->vector,
                                           DistanceMetric::l2)};
      cos.push_back(d.cosine);
      l2.push_back(d.l2);
      out.diffs.push_back(std::move(d));
    }
    summary.n = cos.size();
    summary.cosine = stats_of(std::move(cos));
    summary.l2 = stats_of(std::move(l2));
    out.summaries.push_back(std::move(summary));
  }
  return out;
}

std::vector<MethodPair> parse_pairs(std::string_view spec) {
  std::vector<MethodPair> out;
  for (std::string_view item : text::split(spec, ',')) {
    item = text::trim(item);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == item.size() ||
        item.find(':', colon + 1) != std::string_view::npos) {
      throw Error(ErrorCode::Usage, "pairs look like method_a:method_b, got '" + std::string(item) + "'");
    }
    out.emplace_back(std::string(item.substr(0, colon)), std::string(item.substr(colon + 1)));
  }
  if (out.empty()) throw Error(ErrorCode::Usage, "no method pairs given");
  return out;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

nlohmann::json stats_json(const Stats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"max", s.max}};
}

}  // namespace

std::string diffs_csv(const DiffSummary& s) {
  std::string out = "question_id,method_a,method_b,cosine,l2\n";
  for (const ActivationDiff& d : s.diffs) {
    out += d.question_id + "," + d.method_a + "," + d.method_b + "," + fmt(d.cosine) + "," +
           fmt(d.l2) + "\n";
  }
  return out;
}

nlohmann::json to_json(const DiffSummary& s) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const PairSummary& p : s.summaries) {
    pairs.push_back({{"method_a", p.method_a},
                     {"method_b", p.method_b},
                     {"n", p.n},
                     {"cosine", stats_json(p.cosine)},
                     {"l2", stats_json(p.l2)}});
  }
  return {{"pairs", pairs}};
}

std::string export_matrix(const std::vector<ActivationRecord>& records) {
  std::vector<ActivationRecord> sorted = records;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ActivationRecord& a, const ActivationRecord& b) {
                     if (a.method_id != b.method_id) return a.method_id < b.method_id;
                     return text::id_less(a.question_id, b.question_id);
                   });
  return serialize_activations(sorted);
}

}  // namespace natlan
