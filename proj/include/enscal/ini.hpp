#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace enscal {

/// Minimal INI reader: `[section]` headers, `key = value` pairs, full-line
/// comments starting with '#' or ';'. Values are taken verbatim (trimmed), so
/// paths may contain any character but '\n'.
class IniFile {
 public:
  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  static IniFile parse_string(const std::string& text, const std::string& origin = "<string>") {
    IniFile ini;
    std::istringstream in(text);
    std::string line;
    std::string section;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') fail(origin, line_no, "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty()) fail(origin, line_no, "empty section name");
        ini.sections_[section];
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) fail(origin, line_no, "empty key");
      ini.sections_[section][key] = value;
    }
    return ini;
  }

  bool has(const std::string& section) const { return sections_.contains(section); }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.contains(key);
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    const auto kit = it->second.find(key);
    return kit == it->second.end() ? fallback : kit->second;
  }

  std::string require_string(const std::string& section, const std::string& key) const {
    if (!has(section, key)) {
      throw std::runtime_error("config: missing [" + section + "] " + key);
    }
    return sections_.at(section).at(key);
  }

  long get_int(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    return parse_int(sections_.at(section).at(key), section, key);
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_double(sections_.at(section).at(key), section, key);
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections_.at(section).at(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: [" + section + "] " + key + ": expected boolean, got '" + v + "'");
  }

  std::vector<std::string> get_list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    if (!has(section, key)) return out;
    const std::string& v = sections_.at(section).at(key);
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto comma = v.find(',', pos);
      const std::string item =
          trim(comma == std::string::npos ? v.substr(pos) : v.substr(pos, comma - pos));
      if (!item.empty()) out.push_back(item);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  /// Section names matching the given prefix, in file-independent sorted order.
  std::vector<std::string> sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, kv] : sections_) {
      if (name.rfind(prefix, 0) == 0) out.push_back(name);
    }
    return out;
  }

  static long parse_int(const std::string& v, const std::string& section, const std::string& key) {
    long x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw std::runtime_error("config: [" + section + "] " + key + ": expected integer, got '" + v + "'");
    }
    return x;
  }

  static double parse_double(const std::string& v, const std::string& section,
                             const std::string& key) {
    double x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw std::runtime_error("config: [" + section + "] " + key + ": expected number, got '" + v + "'");
    }
    return x;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] static void fail(const std::string& origin, long line, const std::string& what) {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + what);
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace enscal
