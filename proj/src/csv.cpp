#include "fairaudit/csv.hpp"

#include <fstream>
#include <sstream>

#include "fairaudit/error.hpp"

namespace fairaudit {

namespace {

// State machine over the raw text; returns rows of fields.
std::vector<std::vector<std::string>> parse_records(const std::string& text, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delimiter) {
            end_field();
        } else if (c == '\r') {
            // swallow; LF (or EOF) terminates the record
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return records;
}

} // namespace

CsvDocument parse_csv(const std::string& text, char delimiter) {
    auto records = parse_records(text, delimiter);
    if (records.empty()) throw DataError("csv: empty input (header required)");
    CsvDocument doc;
    doc.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() == 1 && records[r][0].empty()) continue;  // trailing blank line
        if (records[r].size() != doc.header.size()) {
            throw DataError("csv: row " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) + " fields, expected " +
                            std::to_string(doc.header.size()));
        }
        doc.rows.push_back(std::move(records[r]));
    }
    return doc;
}

CsvDocument read_csv_file(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("csv: cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), delimiter);
}

std::string csv_escape(const std::string& field, char delimiter) {
    const bool needs_quotes = field.find_first_of(std::string({delimiter, '"', '\n', '\r'})) != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

void write_csv_file(const std::string& path, const CsvDocument& doc, char delimiter) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("csv: cannot write file: " + path);
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << delimiter;
            out << csv_escape(row[i], delimiter);
        }
        out << '\n';
    };
    write_row(doc.header);
    for (const auto& row : doc.rows) write_row(row);
    if (!out) throw Error("csv: write failed: " + path);
}

} // namespace fairaudit
