// Deterministic CSV output (shortest round-trip doubles, '.' decimal, LF
// endings) and a strict numeric-matrix reader for the anova subcommand.
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pacerbot/common.hpp"

namespace pacerbot {

inline std::string format_number(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::size_t v) { return std::to_string(v); }

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }

    void raw_row(const std::string& line) { out_ << line << "\n"; }

    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((append_field(fields, first), first = false), ...);
        out_ << "\n";
    }

private:
    void append_field(const std::string& s, bool first) {
        if (!first) out_ << ",";
        out_ << s;
    }
    void append_field(const char* s, bool first) {
        if (!first) out_ << ",";
        out_ << s;
    }
    void append_field(double v, bool first) {
        if (!first) out_ << ",";
        out_ << format_number(v);
    }
    void append_field(int v, bool first) {
        if (!first) out_ << ",";
        out_ << v;
    }
    void append_field(std::size_t v, bool first) {
        if (!first) out_ << ",";
        out_ << v;
    }
    std::ofstream out_;
};

struct CsvError : std::runtime_error {
    CsvError(std::size_t line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_number(line) {}
    std::size_t line_number;
};

struct NumericMatrix {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

/// Reads a header + numeric matrix. Every data row must have exactly as
/// many cells as the header and every cell must parse as a number;
/// violations report the offending line (and column where it applies).
inline NumericMatrix read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    NumericMatrix m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = split_csv_line(line);
        if (m.header.empty()) {
            m.header = fields;
            continue;
        }
        if (fields.size() != m.header.size())
            throw CsvError(line_no, "expected " + std::to_string(m.header.size()) + " cells, found " +
                                        std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t col = 0; col < fields.size(); ++col) {
            const std::string& f = fields[col];
            double v = 0.0;
            auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size())
                throw CsvError(line_no, "column " + std::to_string(col + 1) + " ('" + m.header[col] +
                                            "'): not a number: '" + f + "'");
            row.push_back(v);
        }
        m.rows.push_back(std::move(row));
    }
    if (m.header.empty()) throw CsvError(0, "empty file");
    return m;
}

/// FNV-1a 64-bit, used for config snapshot hashes in run manifests.
inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace pacerbot
