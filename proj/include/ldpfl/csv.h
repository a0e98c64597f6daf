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

#ifndef LDPFL_CSV_H_
#define LDPFL_CSV_H_

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ldpfl {

// Every metrics file starts with "# schema=<name>/<version>".
inline constexpr std::string_view kEpisodesSchema = "ldpfl-episodes/1";
inline constexpr std::string_view kLedgerSchema = "ldpfl-ledger/1";
inline constexpr std::string_view kAttackTraceSchema = "ldpfl-attack-trace/1";
inline constexpr std::string_view kDetectionSchema = "ldpfl-detection/1";
inline constexpr std::string_view kSummarySchema = "ldpfl-summary/1";
inline constexpr std::string_view kReportSchema = "ldpfl-report/1";
inline constexpr std::string_view kLossTablesSchema = "ldpfl-loss-tables/1";
inline constexpr std::string_view kQTableSchema = "ldpfl-qtable/1";
inline constexpr std::string_view kRdpTraceSchema = "ldpfl-rdp-trace/1";

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest round-trip representation; "nan", "inf" and "-inf" for
// non-finite values.
std::string FormatDouble(double v);
double ParseDouble(std::string_view s);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::string_view schema,
            std::initializer_list<std::string_view> columns);
  void Row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
  std::size_t width_;
};

struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t Column(std::string_view name) const;
  const std::string& Cell(std::size_t row, std::string_view column) const;
  double Number(std::size_t row, std::string_view column) const;
};

// Throws SchemaError if the schema line differs from `expected_schema` or a
// required column is missing.
CsvTable ReadCsv(std::istream& in, std::string_view expected_schema,
                 std::initializer_list<std::string_view> required_columns);
CsvTable ReadCsvFile(const std::string& path, std::string_view expected_schema,
                     std::initializer_list<std::string_view> required_columns);

}  // namespace ldpfl

#endif  // LDPFL_CSV_H_
