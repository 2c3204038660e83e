#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hetsis {

/// Flat `key = value` configuration with dotted section keys. Values are
/// scalars or bracketed lists (`sweep.n = [2, 10, 100]`); `#` starts a comment.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  /// A scalar broadcast to `size` entries, or a list of exactly `size` entries.
  std::vector<double> get_field(const std::string& key, std::size_t size, double fallback) const;

  /// Throws InvalidArgument naming the first key outside `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

  /// Sorted `key = value` lines; equal configs give equal text.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

bool is_list(const std::string& value);
std::vector<double> parse_number_list(const std::string& value);
double parse_number(const std::string& value);

}  // namespace hetsis
