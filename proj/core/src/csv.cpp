#include "krr/csv.hpp"

#include "krr/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace krr::csv {

    namespace {
        std::string_view trim(std::string_view s) {
            const auto first = s.find_first_not_of(" \t\r\n");
            if (first == std::string_view::npos) { return {}; }
            const auto last = s.find_last_not_of(" \t\r\n");
            return s.substr(first, last - first + 1);
        }

        std::vector<std::string> split(std::string_view line) {
            std::vector<std::string> out;
            std::size_t start = 0;
            while (true) {
                const auto pos = line.find(',', start);
                out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
                if (pos == std::string_view::npos) { break; }
                start = pos + 1;
            }
            return out;
        }
    }  // namespace

    std::string format_number(double value) {
        if (std::isnan(value)) { return "nan"; }
        if (std::isinf(value)) { return value > 0 ? "inf" : "-inf"; }
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        return buf;
    }

    double parse_number(std::string_view field) {
        field = trim(field);
        if (field == "nan") { return std::nan(""); }
        if (field == "inf" || field == "+inf") { return INFINITY; }
        if (field == "-inf") { return -INFINITY; }
        if (!field.empty() && field.front() == '+') { field.remove_prefix(1); }
        double value = 0.0;
        const auto* end = field.data() + field.size();
        const auto [ptr, ec] = std::from_chars(field.data(), end, value);
        if (field.empty() || ec != std::errc() || ptr != end) {
            throw SchemaError("not a number: '" + std::string(field) + "'");
        }
        return value;
    }

    long Table::column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) { return static_cast<long>(i); }
        }
        return -1;
    }

    std::size_t Table::require_column(std::string_view name) const {
        const long c = column(name);
        if (c < 0) { throw SchemaError("missing column '" + std::string(name) + "'"); }
        return static_cast<std::size_t>(c);
    }

    std::vector<double> Table::numeric_column(std::string_view name) const {
        const std::size_t c = require_column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& row : rows) { out.push_back(parse_number(row[c])); }
        return out;
    }

    Table read(std::istream& in) {
        Table table;
        std::string line;
        bool have_header = false;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) { continue; }
            auto fields = split(line);
            if (!have_header) {
                table.header = std::move(fields);
                have_header = true;
                continue;
            }
            if (fields.size() != table.header.size()) {
                throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
        }
        if (!have_header) { throw SchemaError("empty table: header row required"); }
        return table;
    }

    Table read_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) { throw SchemaError("cannot open '" + path + "'"); }
        return read(in);
    }

    void write_row(std::ostream& out, const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) { out << ','; }
            out << fields[i];
        }
        out << '\n';
    }

}  // namespace krr::csv
