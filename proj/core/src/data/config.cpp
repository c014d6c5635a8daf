#include "genkit/data/config.hpp"

#include <fstream>
#include <sstream>

#include "genkit/errors.hpp"

namespace genkit::data {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin) {
    KeyValueConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected `key = value`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (config.index_.count(key) > 0) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": duplicate key '" + key + "'");
        }
        config.index_[key] = config.entries_.size();
        config.entries_.emplace_back(key, value);
    }
    return config;
}

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path.string());
}

bool KeyValueConfig::has(const std::string& key) const {
    return index_.count(key) > 0;
}

const std::string& KeyValueConfig::at(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) {
        throw ConfigError("missing config key '" + key + "'");
    }
    return entries_[it->second].second;
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& fallback) const {
    const auto it = index_.find(key);
    return it == index_.end() ? fallback : entries_[it->second].second;
}

std::vector<std::pair<std::string, std::string>> KeyValueConfig::group(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    const std::string full = prefix + ".";
    for (const auto& [key, value] : entries_) {
        if (key.rfind(full, 0) == 0) {
            out.emplace_back(key.substr(full.size()), value);
        }
    }
    return out;
}

} // namespace genkit::data
