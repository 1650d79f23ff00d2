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

#include "redest/optim.h"

#include <cmath>

namespace redest {

UpdateStatus AdamUpdate(TensorParam& p, const AdamConfig& c) {
  for (Real g : p.grad) {
    if (!std::isfinite(g)) {
      p.ZeroGrad();
      return UpdateStatus::kRejectedNonFinite;
    }
  }
  ++p.step_count;
  const Real t = static_cast<Real>(p.step_count);
  const Real bc1 = 1.0 - std::pow(c.beta1, t);
  const Real bc2 = 1.0 - std::pow(c.beta2, t);
  for (size_t i = 0; i < p.values.size(); ++i) {
    const Real g = p.grad[i];
    p.moment1[i] = c.beta1 * p.moment1[i] + (1.0 - c.beta1) * g;
    p.moment2[i] = c.beta2 * p.moment2[i] + (1.0 - c.beta2) * g * g;
    const Real m_hat = p.moment1[i] / bc1;
    const Real v_hat = p.moment2[i] / bc2;
    p.values[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
  p.ZeroGrad();
  return UpdateStatus::kApplied;
}

int AdamUpdate(const std::vector<TensorParam*>& params,
               const AdamConfig& config) {
  int rejected = 0;
  for (TensorParam* p : params) {
    if (AdamUpdate(*p, config) != UpdateStatus::kApplied) ++rejected;
  }
  return rejected;
}

Real GradNorm(const std::vector<TensorParam*>& params) {
  Real sq = 0.0;
  for (const TensorParam* p : params) {
    for (Real g : p->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

Real ClipGradNorm(const std::vector<TensorParam*>& params, Real max_norm) {
  const Real norm = GradNorm(params);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const Real s = max_norm / norm;
    for (TensorParam* p : params) {
      for (Real& g : p->grad) g *= s;
    }
  }
  return norm;
}

void ZeroGrad(const std::vector<TensorParam*>& params) {
  for (TensorParam* p : params) p->ZeroGrad();
}

void ScaleGrad(const std::vector<TensorParam*>& params, Real factor) {
  for (TensorParam* p : params) {
    for (Real& g : p->grad) g *= factor;
  }
}

}  // namespace redest
