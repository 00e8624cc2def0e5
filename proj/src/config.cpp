#include "updd/config.hpp"

#include <fstream>
#include <istream>

#include "updd/errors.hpp"

namespace updd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& source) {
    std::vector<ConfigEntry> out;
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto cut = line.find_first_of("#;");
        line = trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw UsageError(source + ":" + std::to_string(number) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(source + ":" + std::to_string(number) + ": expected key = value");
        ConfigEntry e{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
        if (e.key.empty()) throw UsageError(source + ":" + std::to_string(number) + ": empty key");
        if (e.value.size() >= 2 && (e.value.front() == '"' || e.value.front() == '\'') &&
            e.value.back() == e.value.front())
            e.value = e.value.substr(1, e.value.size() - 2);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file " + path.string());
    return parse_config(in, path.string());
}

}  // namespace updd
