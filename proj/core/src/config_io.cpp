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

#include "fsat/config_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fsat/error.hpp"

namespace fsat {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view text, std::string_view key) {
  const std::string s(trim(text));
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(parse_double(item, "list"));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view origin) {
  KeyValueConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": empty key");
    }
    if (cfg.contains(key)) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": duplicate key '" +
                        key + "'");
    }
    cfg.entries_.emplace_back(key, value);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config " + path.string());
  os << to_string();
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

const std::string* KeyValueConfig::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

bool KeyValueConfig::contains(std::string_view key) const { return find(key) != nullptr; }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueConfig::set(const std::string& key, double value) { set(key, format_exact(value)); }
void KeyValueConfig::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void KeyValueConfig::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

std::string KeyValueConfig::get_string(std::string_view key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const std::string* v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

long long KeyValueConfig::get_int(std::string_view key, long long fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  long long out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    throw ConfigError("config: key '" + std::string(key) + "' expects an integer, got '" + *v + "'");
  }
  return out;
}

std::size_t KeyValueConfig::get_size(std::string_view key, std::size_t fallback) const {
  const long long v = get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("config: key '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config: key '" + std::string(key) + "' expects a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key,
                                                const std::vector<double>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  try {
    return parse_double_list(*v);
  } catch (const ConfigError&) {
    throw ConfigError("config: key '" + std::string(key) + "' expects a comma separated list");
  }
}

void KeyValueConfig::require_known(const std::vector<std::string>& known_keys) const {
  for (const auto& [k, v] : entries_) {
    if (std::find(known_keys.begin(), known_keys.end(), k) == known_keys.end()) {
      throw ConfigError("config: unknown key '" + k + "'");
    }
  }
}

}  // namespace fsat
