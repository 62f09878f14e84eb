#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capstruct::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row.
  std::vector<std::size_t> lines;

  /// Column position by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Comma-separated with a header row. Double-quoted fields may contain commas and
/// doubled quotes. Blank lines are skipped. Throws DataError when there is no header.
Table read(std::istream& in);

std::vector<std::string> split_line(std::string_view line);

/// Strict parse of a whole field; surrounding blanks allowed.
std::optional<double> parse_double(std::string_view field);
std::optional<long> parse_integer(std::string_view field);

/// Empty, "NA", "NaN" and "." denote a missing value.
bool is_missing(std::string_view field);

/// Shortest text that reads back to the same double.
std::string format_exact(double value);

/// Quotes a field when it contains a delimiter or quote.
std::string escape(std::string_view field);

}  // namespace capstruct::csv
