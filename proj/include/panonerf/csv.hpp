#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "panonerf/common.hpp"

namespace panonerf {

// Shortest round-trippable decimal form (std::to_chars), locale independent.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(int64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require_data(res.ec == std::errc() && res.ptr == s.data() + s.size(),
                 "parse_double: bad number '" + s + "'");
    return v;
}

inline int64_t parse_int(const std::string& s) {
    int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require_data(res.ec == std::errc() && res.ptr == s.data() + s.size(),
                 "parse_int: bad integer '" + s + "'");
    return v;
}

// Minimal CSV: no quoting (fields never contain commas), '\n' line ends.
class CsvWriter {
 public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        require_data(out_.is_open(), "CsvWriter: cannot open " + path);
    }

    void write_row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

 private:
    std::ofstream out_;
};

// Reads all rows; the caller interprets the header.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require_data(in.is_open(), "read_csv: cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace panonerf
