#pragma once

#include <census/error.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace census::csv {

/// Splits one record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(std::string_view line, const std::string& source, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool field_was_quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur.push_back('"');
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            if (!cur.empty() || field_was_quoted) throw ParseError(source, line_no, "unexpected quote inside field");
            quoted = true;
            field_was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            field_was_quoted = false;
        } else {
            if (field_was_quoted) throw ParseError(source, line_no, "characters after closing quote");
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError(source, line_no, "unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string quote_if_needed(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& text, const std::string& source, std::size_t line_no,
                         std::string_view column) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != last)
        throw ParseError(source, line_no, "column '" + std::string(column) + "': '" + text + "' is not a decimal number");
    return v;
}

inline std::int64_t parse_integer(const std::string& text, const std::string& source, std::size_t line_no,
                                  std::string_view column) {
    std::int64_t v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto res = std::from_chars(first, last, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != last)
        throw ParseError(source, line_no, "column '" + std::string(column) + "': '" + text + "' is not an integer");
    return v;
}

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// Reads a headered CSV whose header must equal `columns` exactly. Blank lines
/// are skipped; a trailing CR is tolerated.
inline std::vector<Row> read_table(std::istream& in, const std::vector<std::string>& columns, const std::string& source) {
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.empty()) continue;
        auto fields = split_record(line, source, line_no);
        if (!header_seen) {
            if (fields != columns) {
                std::string expect;
                for (const auto& c : columns) expect += (expect.empty() ? "" : ",") + c;
                throw ParseError(source, line_no, "expected header '" + expect + "'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != columns.size())
            throw ParseError(source, line_no,
                             "expected " + std::to_string(columns.size()) + " fields, found " + std::to_string(fields.size()));
        rows.push_back({line_no, std::move(fields)});
    }
    if (!header_seen) throw ParseError(source, 1, "missing header");
    return rows;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline void write_record(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k) out << ',';
        out << quote_if_needed(fields[k]);
    }
    out << '\n';
}

} // namespace census::csv
