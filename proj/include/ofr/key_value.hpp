#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ofr {

/// Line-oriented `key = value` text: one pair per line, `#` starts a
/// comment, blank lines ignored, no nesting. Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv);

/// Throws ConfigError naming the first key not in `allowed`.
void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& allowed,
                         const std::string& origin);

double parse_double(const std::string& value, const std::string& key);
long long parse_int(const std::string& value, const std::string& key);
bool parse_bool(const std::string& value, const std::string& key);

}  // namespace ofr
