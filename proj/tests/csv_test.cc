//
// Copyright 2026 The LDPFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "ldpfl/csv.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "ldpfl/rng.h"

namespace ldpfl {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

TEST(FormatDoubleTest, ShortestRoundTrip) {
  EXPECT_EQ(FormatDouble(0.1), "0.1");
  EXPECT_EQ(FormatDouble(2.0), "2");
  Substream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.Normal() * std::pow(10.0, rng.Below(40)) * 1e-20;
    EXPECT_EQ(ParseDouble(FormatDouble(v)), v);
  }
}

TEST(FormatDoubleTest, NonFinite) {
  EXPECT_EQ(FormatDouble(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(FormatDouble(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(FormatDouble(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_TRUE(std::isnan(ParseDouble("nan")));
  EXPECT_EQ(ParseDouble("-inf"), -std::numeric_limits<double>::infinity());
}

TEST(CsvTest, WriteThenRead) {
  std::stringstream buf;
  {
    CsvWriter w(buf, "demo/1", {"a", "b"});
    w.Row({"1", "x"});
    w.Row({"2.5", "y"});
  }
  EXPECT_EQ(buf.str(), "# schema=demo/1\na,b\n1,x\n2.5,y\n");
  const CsvTable t = ReadCsv(buf, "demo/1", {"b"});
  EXPECT_THAT(t.columns, ElementsAre("a", "b"));
  EXPECT_EQ(t.Cell(1, "b"), "y");
  EXPECT_DOUBLE_EQ(t.Number(1, "a"), 2.5);
}

TEST(CsvTest, RowWidthMustMatchHeader) {
  std::stringstream buf;
  CsvWriter w(buf, "demo/1", {"a", "b"});
  EXPECT_ANY_THROW(w.Row({"1"}));
}

TEST(CsvTest, SchemaMismatchThrows) {
  std::stringstream buf("# schema=demo/2\na\n1\n");
  try {
    ReadCsv(buf, "demo/1", {"a"});
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_THAT(e.what(), HasSubstr("demo/2"));
  }
}

TEST(CsvTest, MissingColumnThrows) {
  std::stringstream buf("# schema=demo/1\na\n1\n");
  EXPECT_THROW(ReadCsv(buf, "demo/1", {"b"}), SchemaError);
}

TEST(CsvTest, MissingSchemaLineThrows) {
  std::stringstream buf("a\n1\n");
  EXPECT_THROW(ReadCsv(buf, "demo/1", {"a"}), SchemaError);
}

}  // namespace
}  // namespace ldpfl
