#include "hetsis/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hetsis/errors.hpp"

namespace hetsis {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_number(const std::string& value) {
  const std::string text = trim(value);
  double out = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidArgument("config: '" + text + "' is not a number");
  return out;
}

bool is_list(const std::string& value) {
  const std::string text = trim(value);
  return text.size() >= 2 && text.front() == '[' && text.back() == ']';
}

std::vector<double> parse_number_list(const std::string& value) {
  const std::string text = trim(value);
  if (!is_list(text)) return {parse_number(text)};
  std::vector<double> out;
  std::stringstream inner(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(inner, item, ',')) {
    if (trim(item).empty()) throw InvalidArgument("config: empty list element in '" + text + "'");
    out.push_back(parse_number(item));
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key or value");
    if (config.has(key))
      throw InvalidArgument("config line " + std::to_string(line_no) + ": duplicate key " + key);
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (is_list(it->second)) throw InvalidArgument("config: '" + key + "' must be a scalar");
  return parse_number(it->second);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string text = trim(it->second);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw InvalidArgument("config: '" + key + "' must be an integer");
  return out;
}

std::vector<double> KeyValueConfig::get_list(const std::string& key,
                                             const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  auto out = parse_number_list(it->second);
  if (out.empty()) throw InvalidArgument("config: '" + key + "' must not be empty");
  return out;
}

std::vector<double> KeyValueConfig::get_field(const std::string& key, std::size_t size,
                                              double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::vector<double>(size, fallback);
  if (!is_list(it->second)) return std::vector<double>(size, parse_number(it->second));
  auto out = parse_number_list(it->second);
  if (out.size() != size)
    throw InvalidArgument("config: '" + key + "' needs " + std::to_string(size) + " entries");
  return out;
}

void KeyValueConfig::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InvalidArgument("config: unknown key '" + key + "'");
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace hetsis
