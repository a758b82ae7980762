// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#include "baldro/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace baldro {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trim(value.substr(start)));
      break;
    }
    parts.push_back(trim(value.substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

long parse_long(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not an integer: '" + text + "'");
  }
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is not a number: '" + text + "'");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text,
                                          const std::string& origin) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": empty key");
    if (cfg.values.count(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    cfg.values[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

bool KeyValueConfig::has(const std::string& key) const {
  return values.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end())
    throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

long KeyValueConfig::get_int(const std::string& key) const {
  return parse_long(key, get_string(key));
}

double KeyValueConfig::get_double(const std::string& key) const {
  return parse_double(key, get_string(key));
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<long> KeyValueConfig::get_int_list(const std::string& key) const {
  std::vector<long> out;
  for (const std::string& p : split_list(get_string(key)))
    out.push_back(parse_long(key, p));
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key) const {
  std::vector<double> out;
  for (const std::string& p : split_list(get_string(key)))
    out.push_back(parse_double(key, p));
  return out;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& dflt) const {
  return has(key) ? get_string(key) : dflt;
}

long KeyValueConfig::get_int(const std::string& key, long dflt) const {
  return has(key) ? get_int(key) : dflt;
}

double KeyValueConfig::get_double(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}

bool KeyValueConfig::get_bool(const std::string& key, bool dflt) const {
  return has(key) ? get_bool(key) : dflt;
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values)
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace baldro
