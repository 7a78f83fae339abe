#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcp::csv {

/// Splits one line on commas; fields are trimmed of surrounding blanks and a trailing CR.
std::vector<std::string> split_line(std::string_view line);

/// Full-field decimal parse; nullopt if anything but a number is present.
std::optional<double> parse_double(std::string_view text);

/// Shortest representation that round-trips; NaN prints as an empty field.
std::string format_number(double x);

/// Reads a whole headed CSV into rows of fields. Blank lines are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< 1-based source line of each row

    /// Column position or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

Table read_table(std::istream& in, const std::string& source);
Table read_table_file(const std::string& path);

/// Joins fields with commas and a trailing newline.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace mcp::csv
