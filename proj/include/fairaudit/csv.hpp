#pragma once

#include <string>
#include <vector>

namespace fairaudit {

// Minimal RFC-4180 reader/writer. Quoted fields may contain delimiters,
// escaped quotes ("") and newlines; CRLF and LF line endings both accepted.

struct CsvDocument {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvDocument read_csv_file(const std::string& path, char delimiter = ',');
CsvDocument parse_csv(const std::string& text, char delimiter = ',');

std::string csv_escape(const std::string& field, char delimiter = ',');
void write_csv_file(const std::string& path, const CsvDocument& doc, char delimiter = ',');

} // namespace fairaudit
