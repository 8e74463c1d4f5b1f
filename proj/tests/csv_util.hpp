#pragma once

// Test helpers for reading CSV artifacts and comparing them with timing
// columns masked (names ending in `_ns` plus `time_ratio`).

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace csv_util {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline Csv read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Csv csv;
    std::string line;
    if (std::getline(is, line)) csv.header = split(line);
    while (std::getline(is, line)) {
        if (!line.empty()) csv.rows.push_back(split(line));
    }
    return csv;
}

inline bool is_timing_column(const std::string& name) {
    if (name == "time_ratio") return true;
    const std::string suffix = "_ns";
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// serialized content with timing columns dropped
inline std::string stable_content(const std::string& path) {
    const Csv csv = read_csv(path);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < csv.header.size(); ++i)
        if (!is_timing_column(csv.header[i])) keep.push_back(i);
    std::ostringstream os;
    const auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < keep.size(); ++i) {
            if (i) os << ',';
            if (keep[i] < cells.size()) os << cells[keep[i]];
        }
        os << '\n';
    };
    emit(csv.header);
    for (const auto& row : csv.rows) emit(row);
    return os.str();
}

inline double cell_as_double(const Csv& csv, std::size_t row, const std::string& column) {
    for (std::size_t i = 0; i < csv.header.size(); ++i)
        if (csv.header[i] == column) return std::stod(csv.rows.at(row).at(i));
    throw std::runtime_error("no column " + column);
}

}  // namespace csv_util
