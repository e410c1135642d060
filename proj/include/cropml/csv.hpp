#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cropml/common.hpp"

namespace cropml {

// A cell is either text, a finite number, or missing (empty field).
struct Cell {
    enum class Kind { Text, Number, Missing };
    Kind kind = Kind::Missing;
    double number = 0.0;
    std::string text;

    static Cell missing() { return {}; }
    static Cell num(double v) { return {Kind::Number, v, {}}; }
    static Cell str(std::string s) { return {Kind::Text, 0.0, std::move(s)}; }

    bool is_number() const { return kind == Kind::Number; }
    bool is_text() const { return kind == Kind::Text; }
    bool is_missing() const { return kind == Kind::Missing; }
};

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::size_t row_count() const { return rows.size(); }
    std::size_t column_count() const { return header.size(); }

    std::size_t column_index(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw MissingColumn(name);
        return static_cast<std::size_t>(it - header.begin());
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline Cell parse_cell(const std::string& raw) {
    std::string t = detail::trim(raw);
    if (t.empty()) return Cell::missing();
    if (auto v = detail::parse_number(t)) return Cell::num(*v);
    return Cell::str(t);
}

// Parse a comma-delimited UTF-8 file, first line header. If `schema` is
// nonempty every listed column must be present (extra columns are kept).
inline RawTable parse_csv(const std::string& path,
                          const std::vector<std::string>& schema = {}) {
    std::ifstream in(path);
    if (!in) throw UnreadableFile(path);

    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw UnreadableFile(path + ": empty file");
    for (auto& name : detail::split_csv_line(line)) table.header.push_back(detail::trim(name));

    for (const auto& col : schema) {
        if (std::find(table.header.begin(), table.header.end(), col) == table.header.end())
            throw MissingColumn(col + " (in " + path + ")");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != table.header.size()) {
            std::ostringstream msg;
            msg << path << ":" << line_no << " has " << fields.size() << " cells, expected "
                << table.header.size();
            throw RaggedRow(msg.str());
        }
        std::vector<Cell> row;
        row.reserve(fields.size());
        for (auto& f : fields) row.push_back(parse_cell(f));
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Canonicalize a textual column: trim + lowercase, then apply the synonym
// map (keys are matched after the same folding).
inline RawTable normalize_soil_color(RawTable table, const std::string& column,
                                     const std::map<std::string, std::string>& synonym_map) {
    std::size_t col = table.column_index(column);
    std::map<std::string, std::string> folded;
    for (const auto& [k, v] : synonym_map) folded[detail::lowercase(detail::trim(k))] = v;

    for (auto& row : table.rows) {
        Cell& cell = row[col];
        if (!cell.is_text()) continue;
        std::string key = detail::lowercase(detail::trim(cell.text));
        auto it = folded.find(key);
        cell.text = (it != folded.end()) ? it->second : key;
    }
    return table;
}

}  // namespace cropml
