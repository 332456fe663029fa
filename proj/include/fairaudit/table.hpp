#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairaudit/error.hpp"

namespace fairaudit {

enum class ColumnKind { Numeric, Categorical };

// One column of a table. Exactly one of `values` / `codes` is populated,
// depending on `kind`. Categorical cells are stored as indices into `levels`
// (level order is first appearance in the source data).
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> values;       // numeric storage
    std::vector<std::int32_t> codes;  // categorical storage
    std::vector<std::string> levels;

    std::size_t size() const {
        return kind == ColumnKind::Numeric ? values.size() : codes.size();
    }
    const std::string& level_of(std::size_t row) const { return levels[static_cast<std::size_t>(codes[row])]; }

    // Index of a level name, or -1.
    std::int32_t find_level(const std::string& level) const;
    // Index of a level name, appending it if new.
    std::int32_t intern_level(const std::string& level);
};

// Bookkeeping for a one-hot expansion so encoded tables can be decoded back.
struct OneHotEncoding {
    std::string source_column;
    std::vector<std::string> levels;           // sorted; parallel to encoded_columns
    std::vector<std::string> encoded_columns;  // "<source>=<level>"
    std::size_t insert_position = 0;           // column index where the block starts
};

// Immutable-after-construction rectangular dataset. All mutating helpers
// return new tables; operations across the toolkit treat tables as values.
struct Table {
    std::vector<Column> columns;
    std::string label_column;
    std::string protected_column;
    std::vector<OneHotEncoding> encodings;  // applied in order; decode reverses

    std::size_t row_count() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t column_count() const { return columns.size(); }

    bool has_column(const std::string& name) const;
    std::size_t column_index(const std::string& name) const;  // throws DataError
    const Column& column(const std::string& name) const { return columns[column_index(name)]; }
    Column& column(const std::string& name) { return columns[column_index(name)]; }

    // Binary labels from the label column; validates values are exactly 0 or 1.
    std::vector<int> labels() const;
    // Per-row values of the protected column (must be categorical).
    std::vector<std::string> protected_values() const;

    // New table containing the given rows, in the given order.
    Table select_rows(std::span<const std::size_t> rows) const;

    // Structural integrity check: equal column lengths, unique names,
    // label/protected columns present and well formed. Throws DataError.
    void validate() const;
};

// Ordered pair of protected-attribute values. All difference metrics are
// computed as rate(group_a) - rate(group_b).
struct ProtectedSpec {
    std::string attribute;
    std::string group_a;
    std::string group_b;
};

struct SplitPair {
    Table train;
    Table test;
    std::uint64_t seed = 0;
    double ratio = 0.0;
};

} // namespace fairaudit
