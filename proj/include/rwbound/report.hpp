#pragma once

// Tabular reports rendered as aligned text, JSON lines or CSV. Every value
// lives in a table cell, so the machine-readable forms carry everything the
// text form shows (at full precision).

#include "rwbound/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace rwbound {

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    Table& add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("table '" + name + "': row width mismatch");
        rows.push_back(std::move(row));
        return *this;
    }
};

struct Report {
    std::deque<Table> tables;  // deque: references from table() stay valid

    Table& table(std::string name, std::vector<std::string> columns) {
        tables.push_back(Table{std::move(name), std::move(columns), {}});
        return tables.back();
    }

    void note(const std::string& message) {
        Table* notes = nullptr;
        for (auto& t : tables) {
            if (t.name == "notes") notes = &t;
        }
        if (!notes) notes = &table("notes", {"message"});
        notes->add({message});
    }
};

namespace detail {

inline std::string text_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const double v = std::get<double>(c);
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream out;
    out << std::setprecision(10) << v;
    return out.str();
}

inline nlohmann::json json_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    const double v = std::get<double>(c);
    // JSON has no infinity; keep it readable and lossless.
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string csv_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) {
        if (s->find_first_of(",\"\n") == std::string::npos) return *s;
        std::string q = "\"";
        for (char ch : *s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const double v = std::get<double>(c);
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

// Notes go last whatever order they were added in.
inline std::vector<const Table*> ordered(const Report& r) {
    std::vector<const Table*> out;
    for (const auto& t : r.tables) {
        if (t.name != "notes") out.push_back(&t);
    }
    for (const auto& t : r.tables) {
        if (t.name == "notes") out.push_back(&t);
    }
    return out;
}

} // namespace detail

inline void render_text(const Report& r, std::ostream& out) {
    bool first = true;
    for (const Table* tp : detail::ordered(r)) {
        const Table& t = *tp;
        if (!first) out << '\n';
        first = false;
        out << "[" << t.name << "]\n";
        std::vector<std::size_t> width(t.columns.size());
        std::vector<std::vector<std::string>> cells;
        for (std::size_t j = 0; j < t.columns.size(); ++j) width[j] = t.columns[j].size();
        for (const auto& row : t.rows) {
            auto& line = cells.emplace_back();
            for (std::size_t j = 0; j < row.size(); ++j) {
                line.push_back(detail::text_cell(row[j]));
                width[j] = std::max(width[j], line.back().size());
            }
        }
        auto emit = [&](const std::vector<std::string>& line) {
            for (std::size_t j = 0; j < line.size(); ++j) {
                if (j) out << "  ";
                if (j + 1 == line.size()) {
                    out << line[j];
                } else {
                    out << std::left << std::setw(static_cast<int>(width[j])) << line[j];
                }
            }
            out << '\n';
        };
        emit(t.columns);
        for (const auto& line : cells) emit(line);
    }
}

inline void render_json_lines(const Report& r, std::ostream& out) {
    for (const Table* tp : detail::ordered(r)) {
        const Table& t = *tp;
        for (const auto& row : t.rows) {
            nlohmann::ordered_json j;
            j["table"] = t.name;
            for (std::size_t k = 0; k < row.size(); ++k) j[t.columns[k]] = detail::json_cell(row[k]);
            out << j.dump() << '\n';
        }
    }
}

inline void render_csv(const Report& r, std::ostream& out) {
    bool first = true;
    for (const Table* tp : detail::ordered(r)) {
        const Table& t = *tp;
        if (!first) out << '\n';
        first = false;
        out << "table";
        for (const auto& c : t.columns) out << ',' << detail::csv_cell(Cell{c});
        out << '\n';
        for (const auto& row : t.rows) {
            out << detail::csv_cell(Cell{t.name});
            for (const auto& c : row) out << ',' << detail::csv_cell(c);
            out << '\n';
        }
    }
}

inline void render(const Report& r, OutputFormat f, std::ostream& out) {
    switch (f) {
    case OutputFormat::text: render_text(r, out); break;
    case OutputFormat::json_lines: render_json_lines(r, out); break;
    case OutputFormat::csv: render_csv(r, out); break;
    }
}

} // namespace rwbound
