#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowlik/condition.hpp"
#include "flowlik/types.hpp"

namespace flowlik::cli {

/// 17 significant digits.
std::string num(double v);

/// RFC-4180: fields containing a comma, quote or newline are quoted.
std::string csv_field(const std::string& s);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// Parses RFC-4180 text (quoted fields may span lines). Throws IoError on an unterminated quote.
std::vector<CsvRecord> parse_csv(std::istream& in);

struct InputRow {
  std::size_t line = 0;
  std::size_t index = 0;  // 0-based among data records, valid or not
  Vector x;
  Condition condition;
  bool blur = false;  // condition is derived from the sample itself
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct SampleFile {
  std::vector<InputRow> rows;
  std::vector<RowError> errors;
  Index dim = 0;
};

/// Header x0..x{d-1}[,condition]. Condition cells: null | class:K |
/// embedding:v1;v2;... | blur. Malformed rows are collected, not thrown.
/// An empty file yields no rows and dim 0.
SampleFile read_samples(std::istream& in);

/// One condition cell; `blur` is set for the blur keyword (condition left Null).
Condition parse_condition_cell(const std::string& cell, bool& blur);

/// Inverse of the condition cell syntax above (GridMean is written as blur).
std::string condition_cell(const Condition& c);

}  // namespace flowlik::cli
