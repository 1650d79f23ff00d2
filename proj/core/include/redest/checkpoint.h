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

// Versioned parameter container.
//
// Layout: a text manifest terminated by a line "end", followed by every
// parameter array as little-endian IEEE-754 binary64 in manifest order.
//
//   redest-checkpoint
//   format_version 1
//   dtype f64
//   meta <key> <value...>
//   stack <name> <input shape csv> <layer count>
//   layer <kind> <attrs csv>
//   tensor <name> <shape csv>
//   end
//
// Optimizer moments are not persisted. Round trips are bit-exact.

#ifndef REDEST_CHECKPOINT_H_
#define REDEST_CHECKPOINT_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "redest/nn.h"

namespace redest {

inline constexpr int kCheckpointFormatVersion = 1;

class Checkpoint {
 public:
  void SetMeta(const std::string& key, const std::string& value);
  std::optional<std::string> Meta(const std::string& key) const;
  const std::map<std::string, std::string>& meta() const { return meta_; }

  void AddStack(const std::string& name, const LayerStack& stack);
  void AddTensor(const std::string& name, const TensorParam& tensor);
  bool HasStack(const std::string& name) const;

  const LayerStack& Stack(const std::string& name) const;
  const TensorParam& Tensor(const std::string& name) const;
  // Copies parameter values into an existing stack with identical layout.
  void RestoreInto(const std::string& name, LayerStack& dst) const;
  void RestoreInto(const std::string& name, TensorParam& dst) const;

  const std::vector<std::pair<std::string, LayerStack>>& stacks() const {
    return stacks_;
  }

  void Write(std::ostream& os) const;
  static Checkpoint Read(std::istream& is);
  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);

 private:
  std::map<std::string, std::string> meta_;
  std::vector<std::pair<std::string, LayerStack>> stacks_;
  std::vector<std::pair<std::string, TensorParam>> tensors_;
};

// True when both stacks have identical descriptors and bit-identical values.
bool SameParameters(const LayerStack& a, const LayerStack& b);

}  // namespace redest

#endif  // REDEST_CHECKPOINT_H_
