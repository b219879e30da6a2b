#pragma once

#include <fstream>
#include <map>
#include <string>

#include "sqz/errors.hpp"

namespace sqzlab {

// Minimal INI reader: [section] headers, key = value pairs, '#' or ';'
// comments. Keys are stored as "section.key".
class IniFile {
  public:
    IniFile() = default;

    static IniFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw sqz::IoError("cannot open config: " + path);
        IniFile ini;
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto strip = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                const auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            std::string t = strip(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw sqz::ConfigError(path + ":" + std::to_string(line_no) +
                                           ": malformed section header");
                section = strip(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw sqz::ConfigError(path + ":" + std::to_string(line_no) +
                                       ": expected key = value");
            const std::string key = strip(t.substr(0, eq));
            const std::string value = strip(t.substr(eq + 1));
            if (key.empty())
                throw sqz::ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
            ini.values_[section.empty() ? key : section + "." + key] = value;
        }
        return ini;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw sqz::ConfigError("config key '" + key + "' is not a number: " + it->second);
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stoll(it->second);
        } catch (const std::exception&) {
            throw sqz::ConfigError("config key '" + key + "' is not an integer: " + it->second);
        }
    }

    // canonical serialization for the provenance hash
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

    std::map<std::string, std::string>& values() { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace sqzlab
