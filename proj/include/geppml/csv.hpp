#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace geppml::csv {

/// One data row with the 1-based line number it came from.
struct Row {
    long line = 0;
    std::vector<std::string> fields;
};

/// Comma-separated table with a mandatory header row. Fields are not quoted
/// in any of the inputs this engine reads; quoting is only emitted on write.
struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Column position of `name`; throws InputError if absent.
    std::size_t column(std::string_view name) const;
};

/// Reads a table and checks that the header equals `expected_header`
/// (ignored when empty). Blank lines are skipped; a trailing CR is stripped.
Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header = {});

double parse_double(std::string_view s, const std::string& file, long line, std::string_view what);
long parse_long(std::string_view s, const std::string& file, long line, std::string_view what);

/// Shortest text that parses back to the identical double (at most 17 digits).
std::string format_exact(double v);

/// Writes `fields` joined by commas, quoting fields that contain a comma or quote.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace geppml::csv
