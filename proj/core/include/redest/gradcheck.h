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

// Central finite-difference gradient checks. Only forward evaluations are
// used on the numeric side, so the checks stay independent of Backward.

#ifndef REDEST_GRADCHECK_H_
#define REDEST_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "redest/nn.h"

namespace redest {

inline constexpr Real kGradCheckEps = 1e-5;
inline constexpr Real kGradCheckTolerance = 1e-4;

// ||a - n|| / max(||a||, ||n||, 1e-6), computed per gradient block.
Real RelativeError(std::span<const Real> analytic,
                   std::span<const Real> numeric);

// A block of coordinates to perturb together with the analytic gradient the
// caller computed for them.
struct GradBlock {
  std::string name;
  Real* values;
  size_t size;
  Vec analytic;
};

// Central differences of `loss` w.r.t. every coordinate in every block.
// Returns the worst per-block relative error.
Real FiniteDifferenceError(const std::function<Real()>& loss,
                           std::vector<GradBlock>& blocks,
                           Real eps = kGradCheckEps,
                           std::string* worst_block = nullptr);

// Checks a stack under the loss L = <c, y> for a random projection c, with
// random input (and hidden state) drawn from `rng`. Parameters are perturbed
// in place and restored.
Real StackGradientError(LayerStack& stack, std::mt19937_64& rng,
                        Real eps = kGradCheckEps);

struct GradCheckResult {
  std::string name;
  int instances = 0;
  Real worst_error = 0.0;
  bool passed() const { return worst_error < kGradCheckTolerance; }
};

// One randomly shaped (every dimension <= 8) stack per instance for each
// layer kind.
std::vector<GradCheckResult> RunLayerGradChecks(int instances,
                                                std::uint64_t seed);

}  // namespace redest

#endif  // REDEST_GRADCHECK_H_
