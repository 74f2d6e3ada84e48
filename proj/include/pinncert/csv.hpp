#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pinncert::csv {

// Shortest decimal with 17 significant digits, '.' separator.
std::string real(double v);

// Joins formatted fields with commas.
std::string row(const std::vector<double>& values);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws ConfigError when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
};

// Comma separated, first line is the header. Throws ConfigError on I/O
// failure or ragged rows.
Table read(const std::filesystem::path& path);

}  // namespace pinncert::csv
