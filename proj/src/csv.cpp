#include "gridisle/csv.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridisle/errors.hpp"

namespace gridisle::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        std::size_t b = cell.find_first_not_of(" \t\r");
        std::size_t e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw ParseError(path, 1, "missing column '" + name + "'");
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    Table t;
    t.path = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (lineno == 1 || t.header.empty()) {
            t.header = split_line(line);
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ParseError(path, lineno,
                             "expected " + std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.row_lines.push_back(lineno);
    }
    return t;
}

double to_double(const Table& t, std::size_t row, int col) {
    const std::string& s = t.rows[row][col];
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ParseError(t.path, t.row_lines[row],
                         "column " + std::to_string(col + 1) + ": not a number: '" + s + "'");
    return v;
}

long to_long(const Table& t, std::size_t row, int col) {
    const std::string& s = t.rows[row][col];
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ParseError(t.path, t.row_lines[row],
                         "column " + std::to_string(col + 1) + ": not an integer: '" + s + "'");
    return v;
}

std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace gridisle::csv
