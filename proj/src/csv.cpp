#include "pinncert/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pinncert/error.hpp"

namespace pinncert::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

std::string real(double v) { return fmt::format("{:.17g}", v); }

std::string row(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += real(values[i]);
    }
    return out;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("missing CSV column '" + std::string(name) + "'");
}

bool Table::has_column(std::string_view name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

double Table::number(std::size_t r, std::size_t c) const {
    const std::string& s = rows.at(r).at(c);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("not a number in CSV row " + std::to_string(r + 1) + ": '" + s + "'");
    return v;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    Table table;
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw ConfigError(path.string() + " is empty");
    if (line.back() == '\r') line.pop_back();
    table.header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != table.header.size())
            throw ConfigError(path.string() + ": row " + std::to_string(table.rows.size() + 1) +
                              " has " + std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

}  // namespace pinncert::csv
