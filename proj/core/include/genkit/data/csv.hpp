#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace genkit::data {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each row has header.size() fields
};

// RFC-4180 reader: comma separated, double-quote quoting with "" escapes,
// LF or CRLF line endings. The first record is the header.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");

// Writes with minimal quoting (fields containing comma, quote or newline).
std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

} // namespace genkit::data
