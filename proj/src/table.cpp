#include "cogload/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "cogload/error.hpp"

namespace cogload {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

double parse_cell(const std::string& raw, std::size_t line, const std::string& column) {
    const std::string s = trim(raw);
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError(fmt::format("line {}: column '{}' has non-numeric value '{}'", line, column, s));
    return v;
}

}  // namespace

Table Table::read_csv(std::istream& in) {
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: no header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (const std::string& name : split_line(line)) {
        const std::string n = trim(name);
        if (n.empty()) throw DataError("CSV header has an empty column name");
        if (t.has_column(n)) throw DataError(fmt::format("CSV header repeats column '{}'", n));
        t.names_.push_back(n);
        t.columns_.emplace_back();
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_line(line);
        if (fields.size() != t.names_.size())
            throw DataError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                        t.names_.size(), fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c)
            t.columns_[c].push_back(parse_cell(fields[c], line_no, t.names_[c]));
        ++t.rows_;
    }
    return t;
}

Table Table::read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path));
    return read_csv(in);
}

void Table::add_column(const std::string& name, std::vector<double> values) {
    if (has_column(name)) throw DataError(fmt::format("column '{}' already exists", name));
    if (!names_.empty() && values.size() != rows_)
        throw DataError(fmt::format("column '{}' has {} rows, table has {}", name, values.size(), rows_));
    rows_ = values.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
}

bool Table::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& Table::column(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw DataError(fmt::format("missing column '{}'", name));
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

void Table::write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < names_.size(); ++c) out << (c ? "," : "") << names_[c];
    out << '\n';
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < names_.size(); ++c) {
            const double v = columns_[c][r];
            out << (c ? "," : "") << (std::isnan(v) ? std::string("NA") : fmt::format("{}", v));
        }
        out << '\n';
    }
}

}  // namespace cogload
