#ifndef CYTOCOSET_CSV_HPP
#define CYTOCOSET_CSV_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cytocoset::csv {

/// Split one CSV line on commas. Quoting is not supported; a trailing '\r' is dropped.
std::vector<std::string> split_line(std::string_view line);

/// Parse a full-width decimal float. Returns false on any trailing garbage or non-finite value.
bool parse_double(std::string_view text, double& out);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Join fields with commas.
std::string join(const std::vector<std::string>& fields);

/// Read all lines of a file, throwing `DataError` naming the path if it cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Write text to a file, throwing `DataError` naming the path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}

#endif
