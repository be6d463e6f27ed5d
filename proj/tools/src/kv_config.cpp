#include "kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "unlearn/errors.hpp"

namespace unlearn::tools {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.values_.emplace(key, value).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + *v + "'");
  }
  return out;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + *v + "'");
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + *v + "'");
}

void KeyValues::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (known.count(key) == 0) {
      throw ConfigError((source_.empty() ? std::string() : source_ + ": ") +
                        "unknown config key '" + key + "'");
    }
  }
}

std::string KeyValues::to_string() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace unlearn::tools
