#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trojkit/error.hpp"
#include "trojkit/text.hpp"

// Experiment recipes: a sectioned key/value text file.
//
//   # comment
//   [poison]
//   rate = 0.05
//   trigger = tell me seriously
//
// Values run to the end of the line (no inline comments), so trigger phrases
// may contain '#'. Later duplicates win. Every CLI flag of the pipeline has a
// counterpart here; --set section.key=value overrides file entries.

namespace trojkit {

class ConfigFile {
 public:
  static ConfigFile parse_string(std::string_view text,
                                 const std::string& origin = "<string>") {
    ConfigFile cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t stop = std::min(text.find('\n', start), text.size());
      std::string line(text.substr(start, stop - start));
      start = stop + 1;
      ++line_no;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(line_no) +
                            ": unterminated section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(line_no) +
                            ": empty section name");
        cfg.sections_[section];
        continue;
      }
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": empty key");
      cfg.sections_[section][key] = trim(trimmed.substr(eq + 1));
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  std::optional<std::string> get(const std::string& section,
                                 const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  std::string get_or(const std::string& section, const std::string& key,
                     std::string fallback) const {
    auto v = get(section, key);
    return v ? *v : std::move(fallback);
  }

  std::string require(const std::string& section, const std::string& key) const {
    auto v = get(section, key);
    if (!v)
      throw ConfigError("missing config key [" + section + "] " + key);
    return *v;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key +
                        " is not a number: " + *v);
    }
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const long long i = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return i;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key +
                        " is not an integer: " + *v);
    }
  }

  std::uint64_t get_uint(const std::string& section, const std::string& key,
                         std::uint64_t fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const unsigned long long i = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return i;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key +
                        " is not a non-negative integer: " + *v);
    }
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    const std::string folded = detail::ascii_lower_copy(*v);
    if (folded == "true" || folded == "yes" || folded == "on" || folded == "1")
      return true;
    if (folded == "false" || folded == "no" || folded == "off" || folded == "0")
      return false;
    throw ConfigError("config key [" + section + "] " + key +
                      " is not a boolean: " + *v);
  }

  // Comma- or space-separated list of numbers.
  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key,
                                      std::vector<double> fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    std::string token;
    for (char c : *v + ",") {
      if (c == ',' || detail::is_ascii_space(static_cast<unsigned char>(c))) {
        if (!token.empty()) {
          try {
            out.push_back(std::stod(token));
          } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key +
                              " has a bad list entry: " + token);
          }
          token.clear();
        }
      } else {
        token.push_back(c);
      }
    }
    if (out.empty())
      throw ConfigError("config key [" + section + "] " + key +
                        " is an empty list");
    return out;
  }

  void set(const std::string& section, const std::string& key,
           std::string value) {
    sections_[section][key] = std::move(value);
  }

  // "section.key=value" override, as accepted by the CLI --set flag.
  void apply_override(const std::string& spec) {
    const std::size_t eq = spec.find('=');
    const std::size_t dot = spec.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override must look like section.key=value: " + spec);
    set(trim(spec.substr(0, dot)), trim(spec.substr(dot + 1, eq - dot - 1)),
        trim(spec.substr(eq + 1)));
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections()
      const {
    return sections_;
  }

 private:
  static std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && detail::is_ascii_space(static_cast<unsigned char>(s[b])))
      ++b;
    while (e > b && detail::is_ascii_space(static_cast<unsigned char>(s[e - 1])))
      --e;
    return std::string(s.substr(b, e - b));
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace trojkit
