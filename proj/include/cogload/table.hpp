#pragma once

// Minimal numeric column store for panel CSVs. Every column is double; empty
// cells and "NA" read as NaN.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cogload {

class Table {
public:
    Table() = default;

    static Table read_csv(std::istream& in);
    static Table read_csv_file(const std::string& path);

    void add_column(const std::string& name, std::vector<double> values);
    bool has_column(const std::string& name) const;
    /// Throws DataError naming the column when absent.
    const std::vector<double>& column(const std::string& name) const;

    const std::vector<std::string>& names() const { return names_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return names_.size(); }

    void write_csv(std::ostream& out) const;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::size_t rows_ = 0;
};

}  // namespace cogload
