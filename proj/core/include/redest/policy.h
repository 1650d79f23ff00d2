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

// Gaussian actor and privileged critic, and the clipped policy-gradient
// update with generalized advantage estimation.
//
// The actor reads [o_t, h]; the critic additionally reads the privileged
// simulator state. Both treat the fused latent as a constant input.

#ifndef REDEST_POLICY_H_
#define REDEST_POLICY_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "redest/checkpoint.h"
#include "redest/nn.h"
#include "redest/optim.h"
#include "redest/world.h"

namespace redest {

inline constexpr int kActionDim = 2;
inline constexpr int kPrivilegedDim = 2 + kProfileSamples + 2;

struct PolicyConfig {
  int obs_dim = kObsDim;
  // Width of the fused latent, twice the estimator latent.
  int latent_dim = 64;
  int privileged_dim = kPrivilegedDim;
  std::vector<int> actor_hidden{128, 64};
  std::vector<int> critic_hidden{128, 64};
  Real init_log_std = -0.7;
  Real min_log_std = -3.0;
  Real max_log_std = 0.5;

  int actor_input() const { return obs_dim + latent_dim; }
  int critic_input() const { return obs_dim + latent_dim + privileged_dim; }
};

Vec ActorInput(std::span<const Real> obs, std::span<const Real> latent);
Vec CriticInput(std::span<const Real> obs, std::span<const Real> latent,
                std::span<const Real> privileged);

// Diagonal Gaussian helpers.
Real GaussianLogProb(std::span<const Real> mean, std::span<const Real> log_std,
                     std::span<const Real> action);
Real GaussianEntropy(std::span<const Real> log_std);

class ActorCritic {
 public:
  ActorCritic(const PolicyConfig& config, std::uint64_t seed);

  const PolicyConfig& config() const { return config_; }

  Vec Mean(std::span<const Real> actor_in, ForwardResult* fwd = nullptr) const;
  Real Value(std::span<const Real> critic_in,
             ForwardResult* fwd = nullptr) const;
  // log_std clamped to the configured range.
  Vec LogStd() const;
  Vec Sample(std::span<const Real> mean, std::mt19937_64& rng) const;

  LayerStack& actor() { return actor_; }
  LayerStack& critic() { return critic_; }
  const LayerStack& actor() const { return actor_; }
  const LayerStack& critic() const { return critic_; }
  TensorParam& log_std() { return log_std_; }
  const TensorParam& log_std() const { return log_std_; }

  // Actor stack parameters plus log_std.
  std::vector<TensorParam*> ActorParams();
  std::vector<TensorParam*> CriticParams() { return critic_.Params(); }

  void Save(Checkpoint& ckpt) const;
  void Load(const Checkpoint& ckpt);

 private:
  PolicyConfig config_;
  LayerStack actor_, critic_;
  TensorParam log_std_;
};

// Clamps each component to [-1, 1], the range the world accepts.
Action ToWorldAction(std::span<const Real> a);

struct PpoConfig {
  Real clip = 0.2;
  int epochs = 4;
  int minibatches = 4;
  Real discount = 0.99;
  Real gae_lambda = 0.95;
  Real entropy_coef = 0.001;
  Real max_grad_norm = 1.0;
  AdamConfig actor_adam{3e-4};
  AdamConfig critic_adam{1e-3};
};

// Advantages for one environment's consecutive steps. next_values[t] is the
// value of the state after step t (zero after a termination); ends[t] marks
// the last step of an episode or of the rollout, where the recursion stops.
Vec ComputeGae(std::span<const Real> rewards, std::span<const Real> values,
               std::span<const Real> next_values,
               std::span<const std::uint8_t> ends, Real discount,
               Real lambda);

// Shifts to zero mean and unit standard deviation. Returns false and leaves
// the values untouched when the variance is below 1e-12.
bool NormalizeAdvantages(Vec& advantages);

// min(r A, clip(r, 1 - c, 1 + c) A).
Real ClippedSurrogate(Real ratio, Real advantage, Real clip);
// d ClippedSurrogate / d r.
Real ClippedSurrogateGrad(Real ratio, Real advantage, Real clip);

struct PpoSample {
  Vec actor_in;
  Vec critic_in;
  Vec action;  // unclamped sample
  Real log_prob = 0.0;
  Real value = 0.0;
  Real advantage = 0.0;
  Real ret = 0.0;
};

struct PpoStats {
  Real surrogate = 0.0;
  Real value_loss = 0.0;
  Real entropy = 0.0;
  Real clip_fraction = 0.0;
  Real actor_grad_norm = 0.0;
  bool normalization_skipped = false;
};

// Normalizes advantages in place, then runs `epochs` passes of
// `minibatches` shuffled minibatches.
PpoStats PpoUpdate(ActorCritic& ac, std::vector<PpoSample>& samples,
                   const PpoConfig& config, std::mt19937_64& rng);

// Accumulates gradients of the minibatch objective
//   -mean(ClippedSurrogate) - entropy_coef * entropy
// into the actor parameters and returns the surrogate mean.
Real AccumulateActorGradient(ActorCritic& ac,
                             const std::vector<const PpoSample*>& batch,
                             const PpoConfig& config, Real* clip_fraction);

}  // namespace redest

#endif  // REDEST_POLICY_H_
