#include "ofr/key_value.hpp"

#include <fstream>
#include <sstream>

#include "ofr/error.hpp"

namespace ofr {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key `" + key + "`");
    }
  }
  return kv;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str(), path.string());
}

void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& allowed,
                         const std::string& origin) {
  for (const auto& [key, value] : kv) {
    if (!allowed.count(key)) throw ConfigError(origin + ": unknown key `" + key + "`");
  }
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("`" + key + "`: expected a number, got `" + value + "`");
  }
}

long long parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("`" + key + "`: expected an integer, got `" + value + "`");
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("`" + key + "`: expected true/false, got `" + value + "`");
}

}  // namespace ofr
