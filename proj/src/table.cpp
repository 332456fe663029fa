#include "fairaudit/table.hpp"

#include <algorithm>
#include <set>

namespace fairaudit {

std::int32_t Column::find_level(const std::string& level) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == level) return static_cast<std::int32_t>(i);
    }
    return -1;
}

std::int32_t Column::intern_level(const std::string& level) {
    const std::int32_t existing = find_level(level);
    if (existing >= 0) return existing;
    levels.push_back(level);
    return static_cast<std::int32_t>(levels.size() - 1);
}

bool Table::has_column(const std::string& name) const {
    return std::any_of(columns.begin(), columns.end(),
                       [&](const Column& c) { return c.name == name; });
}

std::size_t Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    throw DataError("missing column: " + name);
}

std::vector<int> Table::labels() const {
    const Column& col = column(label_column);
    std::vector<int> out;
    out.reserve(col.size());
    if (col.kind == ColumnKind::Numeric) {
        for (std::size_t r = 0; r < col.values.size(); ++r) {
            const double v = col.values[r];
            if (v != 0.0 && v != 1.0) {
                throw DataError("label column '" + label_column + "' must be 0/1, row " +
                                std::to_string(r) + " has " + std::to_string(v));
            }
            out.push_back(v == 1.0 ? 1 : 0);
        }
    } else {
        throw DataError("label column '" + label_column + "' is categorical; encode it to 0/1 first");
    }
    return out;
}

std::vector<std::string> Table::protected_values() const {
    const Column& col = column(protected_column);
    if (col.kind != ColumnKind::Categorical) {
        throw DataError("protected column '" + protected_column + "' must be categorical");
    }
    std::vector<std::string> out;
    out.reserve(col.size());
    for (std::size_t r = 0; r < col.codes.size(); ++r) out.push_back(col.level_of(r));
    return out;
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
    Table out;
    out.label_column = label_column;
    out.protected_column = protected_column;
    out.encodings = encodings;
    out.columns.reserve(columns.size());
    for (const Column& col : columns) {
        Column c;
        c.name = col.name;
        c.kind = col.kind;
        if (col.kind == ColumnKind::Numeric) {
            c.values.reserve(rows.size());
            for (std::size_t r : rows) c.values.push_back(col.values[r]);
        } else {
            c.levels = col.levels;
            c.codes.reserve(rows.size());
            for (std::size_t r : rows) c.codes.push_back(col.codes[r]);
        }
        out.columns.push_back(std::move(c));
    }
    return out;
}

void Table::validate() const {
    std::set<std::string> names;
    const std::size_t n = row_count();
    for (const Column& c : columns) {
        if (!names.insert(c.name).second) throw DataError("duplicate column name: " + c.name);
        if (c.size() != n) {
            throw DataError("column '" + c.name + "' has " + std::to_string(c.size()) +
                            " rows, expected " + std::to_string(n));
        }
        if (c.kind == ColumnKind::Categorical) {
            for (std::int32_t code : c.codes) {
                if (code < 0 || static_cast<std::size_t>(code) >= c.levels.size()) {
                    throw DataError("column '" + c.name + "' has an out-of-range level code");
                }
            }
        }
    }
    if (!label_column.empty()) (void)column_index(label_column);
    if (!protected_column.empty()) {
        if (column(protected_column).kind != ColumnKind::Categorical) {
            throw DataError("protected column '" + protected_column + "' must be categorical");
        }
    }
}

} // namespace fairaudit
