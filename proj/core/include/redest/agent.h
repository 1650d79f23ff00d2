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

// The full network set of one controller and the per-robot state that runs
// it: observation and depth buffers, recurrent estimator state, the selector
// and the held fused latent.
//
// The policy runs every simulation step. Every `tick_steps` steps a depth
// frame is captured, both estimators advance, and the fused latent is
// recomputed; it is held constant in between.

#ifndef REDEST_AGENT_H_
#define REDEST_AGENT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include "redest/checkpoint.h"
#include "redest/depth.h"
#include "redest/estimators.h"
#include "redest/policy.h"
#include "redest/selector.h"
#include "redest/world.h"

namespace redest {

struct AgentConfig {
  EstimatorConfig estimator;
  AutoencoderConfig autoencoder;
  PolicyConfig policy;
  CameraModel camera;
  DepthRandomization randomization;
  // Pixels removed per side before resampling to the camera size.
  int edge_border = 1;
  int tick_steps = 5;

  // Makes the camera, estimator, autoencoder and policy widths agree.
  void Harmonize();
};

class Agent {
 public:
  Agent(const AgentConfig& config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }

  Estimator op, vp;
  HimTarget him;
  Autoencoder ae;
  ActorCritic ac;

  // Stacks: op_*, vp_*, him, ae, actor, critic and tensor log_std. The
  // layout-defining settings go into meta entries.
  void Save(Checkpoint& ckpt) const;
  static Agent FromCheckpoint(const Checkpoint& ckpt);

 private:
  AgentConfig config_;
};

AgentConfig AgentConfigFromCheckpoint(const Checkpoint& ckpt);

// Randomized render followed by edge truncation; stage kRandomized.
DepthImage CaptureFrame(const World& world, const AgentConfig& config,
                        std::mt19937_64& rng);

// Applied to each captured frame before it enters the buffer, e.g. to
// inject deployment noise.
using FrameFilter = std::function<DepthImage(const DepthImage&)>;

class RobotPerception {
 public:
  explicit RobotPerception(const AgentConfig& config);

  // Clears buffers and recurrent state, keeps the selector threshold.
  void Reset();
  // Pushes o_t; call once per simulation step before Act.
  void Observe(const Vec& obs);
  bool TickDue(int step) const { return step % tick_steps_ == 0; }

  // Captures a frame, advances both estimators and recomputes the latent
  // with `mask`.
  void Refresh(const Agent& agent, const World& world, std::mt19937_64& rng,
               int mask, const FrameFilter& filter = {});
  // Same, with the mask chosen by the selector after scoring the current
  // depth pair with the autoencoder. The filter only advances once the pair
  // holds two real frames.
  void RefreshWithSelector(const Agent& agent, const World& world,
                           std::mt19937_64& rng, int step,
                           const FrameFilter& filter = {});

  const ProprioBuffer& proprio() const { return proprio_; }
  const DepthBuffer& depth() const { return depth_; }
  const Vec& hidden_op() const { return hidden_op_; }
  const Vec& hidden_vp() const { return hidden_vp_; }
  const Vec& latent() const { return latent_; }
  const Vec& last_obs() const { return last_obs_; }
  int mask() const { return mask_; }
  const EstimatorOutput& op_out() const { return op_out_; }
  const EstimatorOutput& vp_out() const { return vp_out_; }
  Real last_loss_ad() const { return last_loss_ad_; }
  SelectorState& selector() { return selector_; }
  const SelectorState& selector() const { return selector_; }
  // Depth stage of the newest buffered frame.
  DepthStage newest_stage() const { return newest_stage_; }

 private:
  void Capture(const Agent& agent, const World& world, std::mt19937_64& rng,
               const FrameFilter& filter);
  void Advance(const Agent& agent, int mask);

  int tick_steps_;
  ProprioBuffer proprio_;
  DepthBuffer depth_;
  Vec hidden_op_, hidden_vp_;
  Vec latent_;
  Vec last_obs_;
  int mask_ = 0;
  EstimatorOutput op_out_, vp_out_;
  Real last_loss_ad_ = 0.0;
  SelectorState selector_;
  DepthStage newest_stage_ = DepthStage::kRaw;
};

}  // namespace redest

#endif  // REDEST_AGENT_H_
