#include "fairaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "fairaudit/csv.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

namespace {

double parse_numeric_cell(const std::string& text, std::size_t row, const std::string& column) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    if (first == last) {
        throw DataError("missing value in numeric column '" + column + "', row " + std::to_string(row));
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw DataError("unparseable numeric value '" + text + "' in column '" + column +
                        "', row " + std::to_string(row));
    }
    return value;
}

Table build_table(const CsvDocument& doc, const TableSchema& schema) {
    std::set<std::string> ignored(schema.ignore_columns.begin(), schema.ignore_columns.end());

    std::vector<std::size_t> header_index;  // per schema column, position in CSV
    for (const ColumnSpec& spec : schema.columns) {
        auto it = std::find(doc.header.begin(), doc.header.end(), spec.name);
        if (it == doc.header.end()) {
            throw DataError("missing column: '" + spec.name + "' not in CSV header");
        }
        header_index.push_back(static_cast<std::size_t>(it - doc.header.begin()));
    }
    for (const std::string& h : doc.header) {
        if (ignored.count(h)) continue;
        const bool declared = std::any_of(schema.columns.begin(), schema.columns.end(),
                                          [&](const ColumnSpec& s) { return s.name == h; });
        if (!declared) {
            throw DataError("CSV column '" + h + "' is not declared in the schema (declare or ignore it)");
        }
    }

    Table t;
    t.label_column = schema.label_column;
    t.protected_column = schema.protected_column;
    t.columns.resize(schema.columns.size());
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const ColumnSpec& spec = schema.columns[c];
        Column& col = t.columns[c];
        col.name = spec.name;
        col.kind = spec.kind;
        if (spec.kind == ColumnKind::Categorical && !spec.levels.empty()) {
            col.levels = spec.levels;
        }
    }

    const bool categorical_label =
        !schema.label_column.empty() &&
        std::any_of(schema.columns.begin(), schema.columns.end(), [&](const ColumnSpec& s) {
            return s.name == schema.label_column && s.kind == ColumnKind::Categorical;
        });
    if (categorical_label && !schema.label_positive.has_value()) {
        throw DataError("categorical label column requires label_positive in the schema");
    }

    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& row = doc.rows[r];
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const ColumnSpec& spec = schema.columns[c];
            const std::string& cell = row[header_index[c]];
            Column& col = t.columns[c];
            if (spec.kind == ColumnKind::Numeric) {
                col.values.push_back(parse_numeric_cell(cell, r, spec.name));
            } else {
                if (cell.empty()) {
                    throw DataError("missing value in column '" + spec.name + "', row " + std::to_string(r));
                }
                if (!spec.levels.empty()) {
                    const std::int32_t code = col.find_level(cell);
                    if (code < 0) {
                        throw DataError("unknown categorical level '" + cell + "' in column '" +
                                        spec.name + "', row " + std::to_string(r));
                    }
                    col.codes.push_back(code);
                } else {
                    col.codes.push_back(col.intern_level(cell));
                }
            }
        }
    }

    // Map a two-level categorical label onto a numeric 0/1 column.
    if (categorical_label) {
        Column& col = t.column(schema.label_column);
        if (col.levels.size() > 2) {
            throw DataError("label column '" + col.name + "' has more than two levels");
        }
        const std::int32_t positive = col.find_level(*schema.label_positive);
        if (positive < 0 && !col.codes.empty()) {
            throw DataError("label_positive level '" + *schema.label_positive +
                            "' does not occur in column '" + col.name + "'");
        }
        Column encoded;
        encoded.name = col.name;
        encoded.kind = ColumnKind::Numeric;
        encoded.values.reserve(col.codes.size());
        for (std::int32_t code : col.codes) encoded.values.push_back(code == positive ? 1.0 : 0.0);
        col = std::move(encoded);
    }

    t.validate();
    if (!t.label_column.empty()) (void)t.labels();  // enforce 0/1 now, not at training time
    return t;
}

std::vector<std::size_t> all_rows(const Table& t) {
    std::vector<std::size_t> idx(t.row_count());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

Table load_csv(const std::string& path, const TableSchema& schema) {
    return build_table(read_csv_file(path, schema.delimiter), schema);
}

Table table_from_csv_text(const std::string& text, const TableSchema& schema) {
    return build_table(parse_csv(text, schema.delimiter), schema);
}

Table preprocess_cardio(const Table& t, const CardioColumns& cols) {
    const std::string years_name = cols.age + "_years";
    const bool has_days = t.has_column(cols.age);
    const bool has_years = t.has_column(years_name);
    if (!has_days && !has_years) throw DataError("missing column: " + cols.age);
    if (has_days && has_years) {
        throw DataError("both '" + cols.age + "' and '" + years_name + "' present; ambiguous input");
    }
    if (!t.has_column(cols.systolic)) throw DataError("missing column: " + cols.systolic);
    if (!t.has_column(cols.diastolic)) throw DataError("missing column: " + cols.diastolic);

    Table out = t;
    if (has_days) {
        Column& age = out.column(cols.age);
        if (age.kind != ColumnKind::Numeric) throw DataError("age column must be numeric");
        for (double& v : age.values) v /= 365.25;
        age.name = years_name;
    }

    const Column& sys = out.column(cols.systolic);
    const Column& dia = out.column(cols.diastolic);
    if (sys.kind != ColumnKind::Numeric || dia.kind != ColumnKind::Numeric) {
        throw DataError("blood pressure columns must be numeric");
    }
    std::vector<std::size_t> keep;
    keep.reserve(out.row_count());
    for (std::size_t r = 0; r < out.row_count(); ++r) {
        const bool sys_ok = sys.values[r] >= 20.0 && sys.values[r] <= 360.0;
        const bool dia_ok = dia.values[r] >= 20.0 && dia.values[r] <= 360.0;
        if (sys_ok && dia_ok) keep.push_back(r);
    }
    out = out.select_rows(keep);

    return one_hot_encode_all(out);
}

Table one_hot_encode_all(const Table& t) {
    std::vector<std::string> targets;
    for (const Column& c : t.columns) {
        if (c.kind != ColumnKind::Categorical) continue;
        if (c.name == t.label_column || c.name == t.protected_column) continue;
        targets.push_back(c.name);
    }
    return targets.empty() ? t : one_hot_encode(t, targets);
}

Table one_hot_encode(const Table& t, const std::vector<std::string>& columns) {
    Table out = t;
    for (const std::string& name : columns) {
        const std::size_t idx = out.column_index(name);
        const Column source = out.columns[idx];
        if (source.kind != ColumnKind::Categorical) {
            throw DataError("column not categorical: " + name);
        }

        OneHotEncoding enc;
        enc.source_column = name;
        enc.insert_position = idx;
        enc.levels = source.levels;
        std::sort(enc.levels.begin(), enc.levels.end());

        std::vector<Column> block;
        for (const std::string& level : enc.levels) {
            Column bin;
            bin.name = name + "=" + level;
            bin.kind = ColumnKind::Numeric;
            if (out.has_column(bin.name)) {
                throw DataError("one-hot target column already exists: " + bin.name);
            }
            const std::int32_t code = source.find_level(level);
            bin.values.reserve(source.codes.size());
            for (std::int32_t c : source.codes) bin.values.push_back(c == code ? 1.0 : 0.0);
            enc.encoded_columns.push_back(bin.name);
            block.push_back(std::move(bin));
        }

        out.columns.erase(out.columns.begin() + static_cast<std::ptrdiff_t>(idx));
        out.columns.insert(out.columns.begin() + static_cast<std::ptrdiff_t>(idx),
                           std::make_move_iterator(block.begin()),
                           std::make_move_iterator(block.end()));
        out.encodings.push_back(std::move(enc));
    }
    out.validate();
    return out;
}

Table decode_one_hot(const Table& t) {
    Table out = t;
    while (!out.encodings.empty()) {
        const OneHotEncoding enc = out.encodings.back();
        out.encodings.pop_back();

        Column restored;
        restored.name = enc.source_column;
        restored.kind = ColumnKind::Categorical;
        restored.levels = enc.levels;
        restored.codes.assign(out.row_count(), -1);

        std::size_t first_pos = out.column_count();
        for (std::size_t li = 0; li < enc.levels.size(); ++li) {
            const std::size_t ci = out.column_index(enc.encoded_columns[li]);
            first_pos = std::min(first_pos, ci);
            const Column& bin = out.columns[ci];
            for (std::size_t r = 0; r < bin.values.size(); ++r) {
                if (bin.values[r] == 1.0) {
                    if (restored.codes[r] >= 0) {
                        throw DataError("row " + std::to_string(r) + " has multiple active indicators for '" +
                                        enc.source_column + "'");
                    }
                    restored.codes[r] = static_cast<std::int32_t>(li);
                } else if (bin.values[r] != 0.0) {
                    throw DataError("non-binary indicator value in column '" + bin.name + "', row " +
                                    std::to_string(r));
                }
            }
        }
        for (std::size_t r = 0; r < restored.codes.size(); ++r) {
            if (restored.codes[r] < 0) {
                throw DataError("row " + std::to_string(r) + " has no active indicator for '" +
                                enc.source_column + "'");
            }
        }

        std::erase_if(out.columns, [&](const Column& c) {
            return std::find(enc.encoded_columns.begin(), enc.encoded_columns.end(), c.name) !=
                   enc.encoded_columns.end();
        });
        const std::size_t pos = std::min(first_pos, out.column_count());
        out.columns.insert(out.columns.begin() + static_cast<std::ptrdiff_t>(pos), std::move(restored));
    }
    out.validate();
    return out;
}

SplitPair train_test_split(const Table& t, std::uint64_t seed, double ratio) {
    if (t.row_count() == 0) throw DataError("cannot split an empty table");
    if (t.row_count() < 2) throw DataError("cannot split a single-row table");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split ratio must be in (0, 1)");

    std::vector<std::size_t> idx = all_rows(t);
    SplitMix64 rng(seed);
    fisher_yates_shuffle(idx, rng);

    const auto n = static_cast<double>(idx.size());
    auto n_train = static_cast<std::size_t>(std::llround(ratio * n));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);

    SplitPair pair;
    pair.seed = seed;
    pair.ratio = ratio;
    pair.train = t.select_rows(std::span(idx.data(), n_train));
    pair.test = t.select_rows(std::span(idx.data() + n_train, idx.size() - n_train));
    return pair;
}

std::map<std::string, double> prevalence_rates(const Table& t, const std::string& attribute) {
    const Column& col = t.column(attribute);
    if (col.kind != ColumnKind::Categorical) {
        throw DataError("prevalence attribute '" + attribute + "' must be categorical");
    }
    if (col.codes.empty()) throw DataError("prevalence over an empty table");
    std::vector<std::size_t> counts(col.levels.size(), 0);
    for (std::int32_t c : col.codes) counts[static_cast<std::size_t>(c)]++;
    std::map<std::string, double> out;
    const double n = static_cast<double>(col.codes.size());
    for (std::size_t i = 0; i < col.levels.size(); ++i) {
        if (counts[i] > 0) out[col.levels[i]] = 100.0 * static_cast<double>(counts[i]) / n;
    }
    return out;
}

Table restrict_subgroups(const Table& t, const ProtectedSpec& spec) {
    const Column& col = t.column(spec.attribute);
    if (col.kind != ColumnKind::Categorical) {
        throw DataError("protected attribute '" + spec.attribute + "' must be categorical");
    }
    if (spec.group_a == spec.group_b) throw DataError("subgroup pair must name two distinct groups");
    const std::int32_t code_a = col.find_level(spec.group_a);
    const std::int32_t code_b = col.find_level(spec.group_b);

    std::vector<std::size_t> keep;
    std::size_t count_a = 0, count_b = 0;
    for (std::size_t r = 0; r < col.codes.size(); ++r) {
        if (code_a >= 0 && col.codes[r] == code_a) {
            keep.push_back(r);
            ++count_a;
        } else if (code_b >= 0 && col.codes[r] == code_b) {
            keep.push_back(r);
            ++count_b;
        }
    }
    if (count_a == 0) throw DataError("subgroup '" + spec.group_a + "' has no rows in column '" + spec.attribute + "'");
    if (count_b == 0) throw DataError("subgroup '" + spec.group_b + "' has no rows in column '" + spec.attribute + "'");
    return t.select_rows(keep);
}

Table subsample_rows(const Table& t, std::size_t max_rows, std::uint64_t seed) {
    if (t.row_count() <= max_rows) return t;
    std::vector<std::size_t> idx = all_rows(t);
    SplitMix64 rng(seed);
    fisher_yates_shuffle(idx, rng);
    idx.resize(max_rows);
    return t.select_rows(idx);
}

} // namespace fairaudit
