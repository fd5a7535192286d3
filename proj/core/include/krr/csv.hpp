#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace krr::csv {

    /// Shortest-safe round-trip formatting: 17 significant digits.
    std::string format_number(double value);

    /// Parses a full field as a double; throws SchemaError otherwise.
    double parse_number(std::string_view field);

    struct Table {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        /// Column position by name, or -1.
        [[nodiscard]] long column(std::string_view name) const;
        /// Column position by name; throws SchemaError when absent.
        [[nodiscard]] std::size_t require_column(std::string_view name) const;
        [[nodiscard]] std::vector<double> numeric_column(std::string_view name) const;
    };

    /// Reads a comma-separated table with a mandatory header row.
    /// Fields are trimmed; quoting is not supported.
    Table read(std::istream& in);
    Table read_file(const std::string& path);

    void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace krr::csv
