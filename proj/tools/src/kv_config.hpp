#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace unlearn::tools {

// Flat `key = value` text. Keys may contain dots to group settings
// (split.mode, train.lr). '#' starts a comment; blank lines are ignored.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming the first key that is not in `known`.
  void require_known(const std::set<std::string>& known) const;

  // Sorted `key = value` lines.
  std::string to_string() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

}  // namespace unlearn::tools
