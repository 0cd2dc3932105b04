#include "isearch/table.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <string>

#include "isearch/error.hpp"

namespace isearch {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

}

NumericTable read_numeric_table(std::istream& in, const std::string& origin,
                                char delimiter) {
    NumericTable table;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line))
        throw DataError(origin + ": empty table, expected a header row");
    ++line_no;
    for (auto& col : split_line(line, delimiter))
        table.columns.push_back(std::string(trim(col)));

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line, delimiter);
        if (cells.size() != table.columns.size())
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.columns.size()) + " columns, got " +
                            std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto cell = trim(cells[c]);
            double v = 0.0;
            const auto* first = cell.data();
            const auto* last = cell.data() + cell.size();
            const auto res = std::from_chars(first, last, v);
            if (cell.empty() || res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
                throw DataError(origin + ":" + std::to_string(line_no) + ": column '" +
                                table.columns[c] + "': not a finite number: '" +
                                std::string(cell) + "'");
            row[c] = v;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

NumericTable read_numeric_table_file(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return read_numeric_table(in, path, delimiter);
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}
