#ifndef SURIMI_CSV_HPP
#define SURIMI_CSV_HPP

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "surimi/common.hpp"

namespace surimi::csv {

// Shortest representation that round-trips the exact double value, so
// serialized radio maps reload bit-identically.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view cell, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // tolerate surrounding spaces
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' ||
                            *(last - 1) == '\r'))
        --last;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("non-numeric cell '" + std::string(cell) + "' at row " +
                         std::to_string(row) + ", column " + std::to_string(col));
    return v;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace surimi::csv

#endif
