#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace genkit::data {

// Flat `key = value` file. `#` starts a comment, blank lines ignored,
// keys may be dotted (`roles.age = Z`). Duplicate keys are an error.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::filesystem::path& path);
    static KeyValueConfig parse_string(const std::string& text,
                                       const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    const std::string& at(const std::string& key) const;  // throws ConfigError
    std::string get_or(const std::string& key, const std::string& fallback) const;

    // All entries whose key starts with `prefix + "."`, suffix -> value,
    // in file order.
    std::vector<std::pair<std::string, std::string>> group(
        const std::string& prefix) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

} // namespace genkit::data
