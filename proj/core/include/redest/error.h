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

#ifndef REDEST_ERROR_H_
#define REDEST_ERROR_H_

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace redest {

// Thrown when a caller violates a documented precondition (shape, range,
// finiteness). Never used for recoverable runtime conditions.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what)
      : std::invalid_argument(what) {}
};

inline std::string ShapeString(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace redest

#endif  // REDEST_ERROR_H_
