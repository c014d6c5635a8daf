#include "genkit/data/csv.hpp"

#include <fstream>
#include <sstream>

#include "genkit/errors.hpp"

namespace genkit::data {

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text,
                                                    const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(record);
        record.clear();
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
        switch (c) {
            case '"':
                if (field.empty() && !field_started) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    throw ValidationError(origin + ": stray quote inside unquoted field");
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;  // swallowed; matched with the following \n
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) {
        throw ValidationError(origin + ": unterminated quoted field");
    }
    if (field_started || !field.empty() || !record.empty()) {
        end_record();  // final record without trailing newline
    }
    return records;
}

} // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    auto records = parse_records(text, origin);
    if (records.empty()) {
        throw ValidationError(origin + ": empty file, header row required");
    }
    CsvTable table;
    table.header = std::move(records.front());
    const std::size_t width = table.header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width) {
            throw ValidationError(origin + ": row " + std::to_string(r) + " has " +
                                  std::to_string(records[r].size()) + " fields, expected " +
                                  std::to_string(width));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open CSV file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), path.string());
}

namespace {

void append_field(std::string& out, const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) {
        out += field;
        return;
    }
    out.push_back('"');
    for (const char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out.push_back(',');
        append_field(out, row[i]);
    }
    out.push_back('\n');
}

} // namespace

std::string format_csv(const CsvTable& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) {
        append_row(out, row);
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot open for writing: " + path.string());
    }
    out << format_csv(table);
}

} // namespace genkit::data
