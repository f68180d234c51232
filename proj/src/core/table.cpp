#include "table.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "error.hpp"

namespace slicelens {

std::optional<std::size_t> Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

// Splits one logical record starting at `pos`; advances `pos` past the
// record terminator. Returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos, char delimiter,
                 std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;

  std::string field;
  bool quoted = false;
  bool field_started = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      ++pos;
    } else if (c == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
      field_started = false;
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
      field_started = true;
      ++pos;
    }
  }
  require(!quoted, ErrorCode::validation, "unterminated quoted field");
  fields.push_back(std::move(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields.front().empty();
}

}  // namespace

Table parse_table(std::string_view text, char delimiter) {
  // UTF-8 byte order mark
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  Table table;
  std::size_t pos = 0;
  std::vector<std::string> fields;
  while (next_record(text, pos, delimiter, fields)) {
    if (!blank(fields)) break;
  }
  require(!fields.empty() && !blank(fields), ErrorCode::validation,
          "input has no header row");
  table.header = fields;
  table.columns.resize(table.header.size());

  std::size_t line = 1;
  while (next_record(text, pos, delimiter, fields)) {
    ++line;
    if (blank(fields)) continue;
    if (fields.size() > table.header.size()) {
      fail(ErrorCode::validation, "row " + std::to_string(line) + " has " +
                                      std::to_string(fields.size()) + " fields, header has " +
                                      std::to_string(table.header.size()));
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      table.columns[c].push_back(c < fields.size() ? std::move(fields[c]) : std::string());
    }
  }
  return table;
}

Table read_table(std::istream& in, char delimiter) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_table(text, delimiter);
}

Table read_table_file(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  return read_table(in, delimiter);
}

}  // namespace slicelens
