#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slicelens {

/// Raw delimited text table held column-wise as strings. No type inference
/// happens here; that is the loader's job.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> columns;

  std::size_t num_rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;
};

/// Parses RFC-4180-style delimited text: header row required, fields may be
/// double-quoted with "" escapes, CRLF tolerated. Short rows are padded with
/// empty cells; long rows are an error.
Table parse_table(std::string_view text, char delimiter = ',');
Table read_table(std::istream& in, char delimiter = ',');
Table read_table_file(const std::filesystem::path& path, char delimiter = ',');

}  // namespace slicelens
