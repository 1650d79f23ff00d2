// Copyright 2026 The redest Authors
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

#include "redest/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "redest/error.h"

namespace redest {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const char* type) {
  throw ContractError("config key '" + key + "': '" + value + "' is not " +
                      type);
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(const std::string& text) {
  KeyValueConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    Require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
    Require(c.kv_.count(key) == 0, "config key '" + key + "' repeated");
    c.kv_[key] = value;
  }
  return c;
}

KeyValueConfig KeyValueConfig::Load(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

bool KeyValueConfig::Has(const std::string& key) const {
  return kv_.count(key) > 0;
}

void KeyValueConfig::Set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

const std::string* KeyValueConfig::Find(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::GetString(const std::string& key,
                                      const std::string& def) {
  const std::string* v = Find(key);
  return v ? *v : def;
}

Real KeyValueConfig::GetReal(const std::string& key, Real def) {
  const std::string* v = Find(key);
  if (!v) return def;
  try {
    size_t used = 0;
    const Real r = std::stod(*v, &used);
    if (used != v->size() || !std::isfinite(r)) BadValue(key, *v, "a real");
    return r;
  } catch (const std::logic_error&) {
    BadValue(key, *v, "a real");
  }
}

int KeyValueConfig::GetInt(const std::string& key, int def) {
  const std::string* v = Find(key);
  if (!v) return def;
  int out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    BadValue(key, *v, "an integer");
  }
  return out;
}

std::uint64_t KeyValueConfig::GetU64(const std::string& key,
                                     std::uint64_t def) {
  const std::string* v = Find(key);
  if (!v) return def;
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    BadValue(key, *v, "an unsigned integer");
  }
  return out;
}

bool KeyValueConfig::GetBool(const std::string& key, bool def) {
  const std::string* v = Find(key);
  if (!v) return def;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  BadValue(key, *v, "a boolean");
}

std::vector<std::string> KeyValueConfig::GetList(
    const std::string& key, const std::vector<std::string>& def) {
  const std::string* v = Find(key);
  if (!v) return def;
  std::vector<std::string> out;
  std::istringstream is(*v);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::Unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv_) {
    if (consumed_.count(k) == 0) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::ToText() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace redest
