// Copyright 2026 the baldro authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace baldro {

/// Configuration or input problem; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat "key = value" text. Blank lines and lines starting with '#' are
/// ignored; keys and values are whitespace-trimmed; duplicate keys are an
/// error.
struct KeyValueConfig {
  std::map<std::string, std::string> values;

  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text,
                                   const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  /// Throws ConfigError naming the key when missing or malformed.
  std::string get_string(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<long> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& dflt) const;
  long get_int(const std::string& key, long dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  /// Unknown keys are hard errors naming the offending key.
  void require_known(const std::set<std::string>& allowed) const;
};

}  // namespace baldro
