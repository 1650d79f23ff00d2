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

#ifndef REDEST_OPTIM_H_
#define REDEST_OPTIM_H_

#include <vector>

#include "redest/nn.h"

namespace redest {

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

enum class UpdateStatus { kApplied, kRejectedNonFinite };

// One bias-corrected Adam step. Gradients are zeroed afterwards either way;
// a non-finite gradient leaves values and moments untouched.
UpdateStatus AdamUpdate(TensorParam& param, const AdamConfig& config);

// Applies AdamUpdate to every parameter; returns the number rejected.
int AdamUpdate(const std::vector<TensorParam*>& params,
               const AdamConfig& config);

Real GradNorm(const std::vector<TensorParam*>& params);
// Rescales gradients so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
Real ClipGradNorm(const std::vector<TensorParam*>& params, Real max_norm);
void ZeroGrad(const std::vector<TensorParam*>& params);
void ScaleGrad(const std::vector<TensorParam*>& params, Real factor);

}  // namespace redest

#endif  // REDEST_OPTIM_H_
