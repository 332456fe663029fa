#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/table.hpp"

namespace fairaudit {

// Declared schema for a CSV input. Columns not listed (and not ignored) are an
// error, as is a listed column missing from the header.
struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> levels;  // optional closed level set for categoricals
};

struct TableSchema {
    std::vector<ColumnSpec> columns;
    std::string label_column;
    std::string protected_column;
    std::vector<std::string> ignore_columns;
    char delimiter = ',';
    // For a two-level categorical label: the level mapped to 1.
    std::optional<std::string> label_positive;
};

Table load_csv(const std::string& path, const TableSchema& schema);
Table table_from_csv_text(const std::string& text, const TableSchema& schema);

// Column names used by the cardiology preprocessing preset.
struct CardioColumns {
    std::string age = "age";          // recorded in days; converted to years
    std::string systolic = "ap_hi";
    std::string diastolic = "ap_lo";
};

// Preset: convert age from days to years (column renamed "<age>_years"),
// drop rows whose systolic or diastolic pressure falls outside [20, 360],
// then one-hot encode remaining categorical columns except label/protected.
// Idempotent: a second application is the identity.
Table preprocess_cardio(const Table& t, const CardioColumns& cols = {});

// Preset: one-hot encode every categorical column except label/protected.
Table one_hot_encode_all(const Table& t);

// Replace each named categorical column with one binary column per level
// (levels sorted lexicographically, columns named "<name>=<level>"). The
// mapping is recorded on the returned table so decode_one_hot can round-trip.
Table one_hot_encode(const Table& t, const std::vector<std::string>& columns);

// Reverse all recorded one-hot encodings (most recent first). Requires every
// encoded row to have exactly one active indicator per block.
Table decode_one_hot(const Table& t);

// Deterministic shuffle-and-cut split: Fisher-Yates over row indices driven by
// SplitMix64 seeded with `seed`, then the first round(ratio*n) rows form the
// training side. Requires at least two rows.
SplitPair train_test_split(const Table& t, std::uint64_t seed, double ratio);

// Percentage of rows per level of a categorical column. Sums to 100.
std::map<std::string, double> prevalence_rates(const Table& t, const std::string& attribute);

// Keep only rows whose protected value is group_a or group_b. Errors if either
// group ends up empty.
Table restrict_subgroups(const Table& t, const ProtectedSpec& spec);

// First `max_rows` rows of a deterministic shuffle (identity when the table is
// already small enough).
Table subsample_rows(const Table& t, std::size_t max_rows, std::uint64_t seed);

} // namespace fairaudit
