#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace merge::tsv {

struct Table {
    std::filesystem::path source;
    std::vector<std::string> header;
    /// Data rows; line_numbers[i] is the 1-based file line of rows[i].
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

/// Reads a tab-separated file with one header row. Blank lines are skipped.
/// Every data row must have as many fields as the header.
Table read(const std::filesystem::path& path);

/// Parses a finite or non-finite double; throws on malformed text.
double parse_double(std::string_view text, std::string_view where);
long long parse_int(std::string_view text, std::string_view where);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

/// Writes header + rows, creating parent directories as needed.
void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

} // namespace merge::tsv
