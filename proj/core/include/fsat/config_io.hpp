// Copyright 2026 The fsat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fsat {

/// Flat `key = value` configuration. Blank lines and lines starting with '#'
/// are ignored; keys are unique; order of insertion is preserved on output.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  std::string to_string() const;

  bool contains(std::string_view key) const;
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, bool value);

  std::string get_string(std::string_view key, const std::string& fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  /// get_int that rejects negative values.
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  void set_size(const std::string& key, std::size_t value) {
    set(key, static_cast<long long>(value));
  }
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view key, const std::vector<double>& fallback) const;

  /// Throws ConfigError naming the first key outside the allowed prefixes.
  void require_known(const std::vector<std::string>& known_keys) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  const std::string* find(std::string_view key) const;

  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Formats a double so that parsing it back yields the identical value.
std::string format_exact(double value);
std::vector<double> parse_double_list(std::string_view text);

}  // namespace fsat
