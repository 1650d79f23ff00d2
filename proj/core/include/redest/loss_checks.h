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

// Finite-difference checks of the training losses through the full networks
// that produce them.

#ifndef REDEST_LOSS_CHECKS_H_
#define REDEST_LOSS_CHECKS_H_

#include <cstdint>
#include <random>
#include <vector>

#include "redest/estimators.h"
#include "redest/gradcheck.h"

namespace redest {

// Narrow widths so a full central-difference sweep stays cheap.
EstimatorConfig SmallEstimatorConfig(EncoderVariant variant);

// Worst relative error over every estimator and target-encoder parameter.
Real EstimatorLossGradError(EstimatorKind kind, EncoderVariant variant,
                            std::mt19937_64& rng);
// Worst relative error of the reconstruction loss over every autoencoder
// parameter and the input frames.
Real AutoencoderLossGradError(std::mt19937_64& rng);

// Results named loss_op, loss_vp and loss_ad; `instances` per encoder
// variant for the estimator losses.
std::vector<GradCheckResult> RunLossGradChecks(int instances,
                                               std::uint64_t seed);

}  // namespace redest

#endif  // REDEST_LOSS_CHECKS_H_
