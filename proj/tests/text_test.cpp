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

#include "natlan/codec.hpp"
#include "natlan/csv.hpp"
#include "natlan/error.hpp"
#include "natlan/text.hpp"
#include "test_util.hpp"

namespace natlan {
namespace {

TEST(TextTest, TrimAndSplit) {
  EXPECT_EQ(text::trim("  a b\r\n"), "a b");
  EXPECT_EQ(text::trim(""), "");
  EXPECT_EQ(text::trim_line_breaks(" x \r\n"), " x ");
  const auto parts = text::split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
}

TEST(TextTest, IdOrderIsNumericFirst) {
  std::vector<std::string> ids = {"10", "x", "2", "1", "b"};
  std::sort(ids.begin(), ids.end(), text::id_less);
  EXPECT_EQ(ids, (std::vector<std::string>{"1", "2", "10", "b", "x"}));
}

TEST(TextTest, WriteFileCreatesDirectories) {
  testing::TempDir dir;
  const std::string path = dir.file("a/b/c.txt");
  text::write_file(path, "hello");
  EXPECT_EQ(text::read_file(path), "hello");
  text::write_file(path, "again");
  EXPECT_EQ(text::read_file(path), "again");
}

TEST(TextTest, ReadMissingFileThrows) {
  try {
    text::read_file("/nonexistent/file.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFile);
  }
}

TEST(CsvTest, QuotedFieldsAndLineNumbers) {
  const std::string data =
      "\xEF\xBB\xBFid,question\r\n"
      "1,\"a, \"\"quoted\"\"\nsecond line\"\r\n"
      "\n"
      "2,plain\n";
  const auto rows = csv::parse(data);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields[0], "id");
  EXPECT_EQ(rows[1].fields[1], "a, \"quoted\"\nsecond line");
  EXPECT_EQ(rows[1].line, 2u);
  EXPECT_EQ(rows[2].line, 5u);
  EXPECT_EQ(rows[2].fields[1], "plain");
}

TEST(CsvTest, UnterminatedQuoteReportsLine) {
  try {
    csv::parse("a,b\n1,\"open\n");
    FAIL();
  } catch (const LineError& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowParseError);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(CsvTest, EscapeRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with\"quote", "two\nlines"};
  const auto rows = csv::parse(csv::join(fields) + "\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].fields, fields);
}

TEST(CodecTest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_raw("abc").size(), 32u);
}

TEST(CodecTest, Base64) {
  const std::vector<std::uint8_t> bytes = {0, 1, 2, 250, 251};
  const std::string enc = base64_encode(bytes);
  EXPECT_EQ(enc, "AAEC+vs=");
  EXPECT_EQ(base64_decode(enc), bytes);
  EXPECT_EQ(base64_decode(""), std::vector<std::uint8_t>{});
  EXPECT_FALSE(base64_decode("AAE"));
  EXPECT_FALSE(base64_decode("AA*C"));
}

}  // namespace
}  // namespace natlan
