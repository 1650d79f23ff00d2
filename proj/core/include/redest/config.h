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

// Flat key-value configuration text:
//
//   # comment
//   key = value
//
// Keys are unique. Readers mark the keys they consume so leftovers can be
// reported as unknown.

#ifndef REDEST_CONFIG_H_
#define REDEST_CONFIG_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "redest/nn.h"

namespace redest {

class KeyValueConfig {
 public:
  static KeyValueConfig Parse(const std::string& text);
  static KeyValueConfig Load(const std::string& path);

  bool Has(const std::string& key) const;
  void Set(const std::string& key, const std::string& value);

  std::string GetString(const std::string& key, const std::string& def);
  Real GetReal(const std::string& key, Real def);
  int GetInt(const std::string& key, int def);
  std::uint64_t GetU64(const std::string& key, std::uint64_t def);
  bool GetBool(const std::string& key, bool def);
  // Comma-separated list.
  std::vector<std::string> GetList(const std::string& key,
                                   const std::vector<std::string>& def);

  // Keys present in the text that no getter asked for.
  std::vector<std::string> Unconsumed() const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Sorted "key = value" lines; Parse(ToText()) reproduces the entries.
  std::string ToText() const;

 private:
  const std::string* Find(const std::string& key);

  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
};

}  // namespace redest

#endif  // REDEST_CONFIG_H_
