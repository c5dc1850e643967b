#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "essd/error.hpp"

namespace essd {

// Shortest decimal form that round-trips the double exactly. Used for every
// floating-point value written to disk so output is platform-stable.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double_field(std::string_view s,
                                 const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(Errc::MalformedRow,
                context + ": bad number '" + std::string(s) + "'");
  return v;
}

// Splits one CSV record. Supports quoted fields with doubled-quote escapes.
// Records never span lines; the loaders reject embedded newlines upstream.
inline std::vector<std::string> split_csv_line(std::string_view line,
                                               std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  bool in_field_quotes = false;
  while (i < line.size()) {
    char c = line[i];
    if (in_field_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_field_quotes = false;
        ++i;
        continue;
      }
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"' && field.empty() && !quoted) {
      in_field_quotes = true;
      quoted = true;
      ++i;
      continue;
    }
    if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      quoted = false;
      ++i;
      continue;
    }
    field.push_back(c);
    ++i;
  }
  if (in_field_quotes)
    throw Error(Errc::MalformedRow,
                "unterminated quote on line " + std::to_string(line_no));
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join_csv(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(fields[i]);
  }
  return out;
}

// Reads a whole CSV file: header row plus records. Strips trailing '\r'
// so files written on Windows load unchanged.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv_file(const std::string& path,
                              std::size_t expected_columns = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    auto fields = split_csv_line(line, line_no);
    if (line_no == 1) {
      table.header = std::move(fields);
      if (expected_columns && table.header.size() != expected_columns)
        throw Error(Errc::MalformedRow,
                    path + ": expected " + std::to_string(expected_columns) +
                        " columns, header has " +
                        std::to_string(table.header.size()));
      continue;
    }
    if (fields.size() != table.header.size())
      throw Error(Errc::MalformedRow,
                  path + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (line_no == 0) throw Error(Errc::MalformedRow, path + ": empty file");
  return table;
}

}  // namespace essd
