#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace updd {

struct ConfigEntry {
    std::string section;  // empty before the first [section]
    std::string key;
    std::string value;
    int line = 0;
};

// Flat `key = value` text with optional [section] headers. `#` and `;` start
// comments; surrounding whitespace and matching quotes are stripped.
std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& source = "<config>");
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);

}  // namespace updd
