#include "csv.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "flowlik/errors.hpp"

namespace flowlik::cli {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << '\n';
}

std::vector<CsvRecord> parse_csv(std::istream& in) {
  std::vector<CsvRecord> records;
  std::string field;
  CsvRecord rec;
  std::size_t line = 1;
  rec.line = line;
  bool quoted = false;
  bool any = false;
  char ch = 0;
  auto end_record = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) records.push_back(std::move(rec));
    rec = CsvRecord{};
    any = false;
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (!any) {
      rec.line = line;
      any = true;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      rec.fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      continue;
    } else if (ch == '\n') {
      end_record();
      ++line;
    } else {
      field += ch;
    }
  }
  if (quoted) throw IoError("csv: unterminated quoted field starting near line " + std::to_string(rec.line));
  if (any) end_record();
  return records;
}

namespace {

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size() && std::isfinite(out);
}

}  // namespace

Condition parse_condition_cell(const std::string& cell, bool& blur) {
  blur = false;
  if (cell.empty() || cell == "null") return Condition::null();
  if (cell == "blur") {
    blur = true;
    return Condition::null();
  }
  if (cell.rfind("class:", 0) == 0) {
    const std::string idx = cell.substr(6);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad class label '" + cell + "'");
    }
    return Condition::class_label(std::stoull(idx));
  }
  if (cell.rfind("embedding:", 0) == 0) {
    std::vector<double> values;
    std::stringstream ss(cell.substr(10));
    std::string part;
    while (std::getline(ss, part, ';')) {
      double v = 0.0;
      if (!parse_double(part, v)) throw ConfigError("bad embedding value '" + part + "'");
      values.push_back(v);
    }
    if (values.empty()) throw ConfigError("empty embedding");
    return Condition::embedding(Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size())));
  }
  throw ConfigError("unknown condition '" + cell + "'");
}

SampleFile read_samples(std::istream& in) {
  SampleFile file;
  const std::vector<CsvRecord> records = parse_csv(in);
  if (records.empty()) return file;  // empty input: nothing to score
  const auto& header = records.front().fields;
  bool has_condition = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "x" + std::to_string(i)) {
      ++file.dim;
    } else if (header[i] == "condition" && i + 1 == header.size()) {
      has_condition = true;
    } else {
      throw IoError("input header: expected x0..x{d-1} optionally followed by condition, got '" + header[i] + "'");
    }
  }
  if (file.dim == 0) throw IoError("input header has no x columns");
  const std::size_t expected = static_cast<std::size_t>(file.dim) + (has_condition ? 1 : 0);

  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& rec = records[r];
    if (rec.fields.size() != expected) {
      file.errors.push_back({rec.line, "expected " + std::to_string(expected) + " fields, got " +
                                           std::to_string(rec.fields.size())});
      continue;
    }
    InputRow row;
    row.line = rec.line;
    row.index = r - 1;
    row.x.resize(file.dim);
    bool ok = true;
    for (Index i = 0; i < file.dim; ++i) {
      if (!parse_double(rec.fields[static_cast<std::size_t>(i)], row.x[i])) {
        file.errors.push_back({rec.line, "column x" + std::to_string(i) + ": '" +
                                             rec.fields[static_cast<std::size_t>(i)] + "' is not a finite number"});
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (has_condition) {
      try {
        row.condition = parse_condition_cell(rec.fields.back(), row.blur);
      } catch (const Error& e) {
        file.errors.push_back({rec.line, std::string("condition: ") + e.what()});
        continue;
      }
    }
    file.rows.push_back(std::move(row));
  }
  return file;
}

std::string condition_cell(const Condition& c) {
  switch (c.kind()) {
    case Condition::Kind::Null:
      return "null";
    case Condition::Kind::ClassLabel:
      return c.describe();
    case Condition::Kind::Embedding: {
      std::string s = "embedding:";
      const Vector v = *c.mean_vector();
      for (Index i = 0; i < v.size(); ++i) s += (i ? ";" : "") + num(v[i]);
      return s;
    }
    case Condition::Kind::GridMean:
      return "blur";
  }
  return "null";
}

}  // namespace flowlik::cli
