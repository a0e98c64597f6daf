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

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ldpfl {
namespace {

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string SchemaLine(std::string_view schema) {
  return "# schema=" + std::string(schema);
}

}  // namespace

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double ParseDouble(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

CsvWriter::CsvWriter(std::ostream& out, std::string_view schema,
                     std::initializer_list<std::string_view> columns)
    : out_(out), width_(columns.size()) {
  out_ << SchemaLine(schema) << '\n';
  bool first = true;
  for (std::string_view c : columns) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::Row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw std::logic_error("csv row has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::size_t CsvTable::Column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw SchemaError("missing column '" + std::string(name) + "'");
}

const std::string& CsvTable::Cell(std::size_t row,
                                  std::string_view column) const {
  return rows.at(row).at(Column(column));
}

double CsvTable::Number(std::size_t row, std::string_view column) const {
  return ParseDouble(Cell(row, column));
}

CsvTable ReadCsv(std::istream& in, std::string_view expected_schema,
                 std::initializer_list<std::string_view> required_columns) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0) {
    throw SchemaError("missing schema header line");
  }
  table.schema = line.substr(9);
  if (table.schema != expected_schema) {
    throw SchemaError("schema mismatch: found '" + table.schema +
                      "', expected '" + std::string(expected_schema) + "'");
  }
  if (!std::getline(in, line)) throw SchemaError("missing column header");
  table.columns = Split(line);
  for (std::string_view c : required_columns) table.Column(c);
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = Split(line);
    if (cells.size() != table.columns.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(table.columns.size()) + " cells");
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

CsvTable ReadCsvFile(const std::string& path, std::string_view expected_schema,
                     std::initializer_list<std::string_view> required_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return ReadCsv(in, expected_schema, required_columns);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

}  // namespace ldpfl
