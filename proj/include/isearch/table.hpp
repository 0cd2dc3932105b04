#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isearch {

/// Rectangular numeric table with named columns.
struct NumericTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// Reads a delimited numeric table with a header row. Every cell must
/// parse as a finite number; errors carry `origin:line` and the column
/// name. Quoting is not interpreted.
NumericTable read_numeric_table(std::istream& in, const std::string& origin,
                                char delimiter = ',');
NumericTable read_numeric_table_file(const std::string& path,
                                     char delimiter = ',');

std::vector<std::string> split_line(const std::string& line, char delimiter);

/// Locale-independent formatting used across all emitted files.
std::string format_full(double v);     // round-trips a double exactly
std::string format_fixed(double v, int decimals);

}
