#pragma once

#include <string>
#include <vector>

namespace gridisle::csv {

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> row_lines;  // 1-based source line per row

    int column(const std::string& name) const;  // throws ParseError if absent
};

Table read_file(const std::string& path);

double to_double(const Table& t, std::size_t row, int col);
long to_long(const Table& t, std::size_t row, int col);

// Shortest round-trippable decimal form; deterministic across runs.
std::string format_double(double v);

}  // namespace gridisle::csv
