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

#include "redest/agent.h"

#include <sstream>

#include "redest/error.h"

namespace redest {
namespace {

std::uint64_t SubSeed(std::uint64_t seed, std::uint64_t k) {
  std::seed_seq seq{seed, k};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out),
               reinterpret_cast<std::uint32_t*>(out) + 2);
  return out[0];
}

int MetaInt(const Checkpoint& ckpt, const std::string& key) {
  const auto v = ckpt.Meta(key);
  Require(v.has_value(), "checkpoint lacks meta '" + key + "'");
  return std::stoi(*v);
}

std::string JoinInts(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> SplitInts(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void AgentConfig::Harmonize() {
  camera.height = estimator.depth_height;
  camera.width = estimator.depth_width;
  autoencoder.input = estimator.DepthShape();
  policy.obs_dim = estimator.obs_dim;
  policy.latent_dim = 2 * estimator.latent;
  camera.Validate();
  Require(tick_steps >= 1, "tick_steps must be positive");
  Require(edge_border >= 0 && 2 * edge_border < camera.height &&
              2 * edge_border < camera.width,
          "edge border leaves no image");
}

Agent::Agent(const AgentConfig& config, std::uint64_t seed)
    : op(EstimatorKind::kOp, config.estimator, SubSeed(seed, 1)),
      vp(EstimatorKind::kVp, config.estimator, SubSeed(seed, 2)),
      him(config.estimator, SubSeed(seed, 3)),
      ae(config.autoencoder, SubSeed(seed, 4)),
      ac(config.policy, SubSeed(seed, 5)),
      config_(config) {
  Require(config.policy.latent_dim == 2 * config.estimator.latent,
          "policy latent width must be twice the estimator latent");
  Require(config.autoencoder.input == config.estimator.DepthShape(),
          "autoencoder input must match the depth buffer");
}

void Agent::Save(Checkpoint& ckpt) const {
  const EstimatorConfig& e = config_.estimator;
  ckpt.SetMeta("depth_height", std::to_string(e.depth_height));
  ckpt.SetMeta("depth_width", std::to_string(e.depth_width));
  ckpt.SetMeta("history", std::to_string(e.history));
  ckpt.SetMeta("depth_frames", std::to_string(e.depth_frames));
  ckpt.SetMeta("encoder", EncoderVariantName(e.variant));
  ckpt.SetMeta("ae_channels", JoinInts(config_.autoencoder.channels));
  ckpt.SetMeta("ae_bottleneck", std::to_string(config_.autoencoder.bottleneck));
  ckpt.SetMeta("actor_hidden", JoinInts(config_.policy.actor_hidden));
  ckpt.SetMeta("critic_hidden", JoinInts(config_.policy.critic_hidden));
  ckpt.SetMeta("edge_border", std::to_string(config_.edge_border));
  ckpt.SetMeta("tick_steps", std::to_string(config_.tick_steps));
  op.Save(ckpt, "op");
  vp.Save(ckpt, "vp");
  ckpt.AddStack("him", him.stack());
  ckpt.AddStack("ae", ae.net());
  ac.Save(ckpt);
}

AgentConfig AgentConfigFromCheckpoint(const Checkpoint& ckpt) {
  AgentConfig c;
  c.estimator.depth_height = MetaInt(ckpt, "depth_height");
  c.estimator.depth_width = MetaInt(ckpt, "depth_width");
  c.estimator.history = MetaInt(ckpt, "history");
  c.estimator.depth_frames = MetaInt(ckpt, "depth_frames");
  c.estimator.variant = EncoderVariantFromName(*ckpt.Meta("encoder"));
  c.autoencoder.channels = SplitInts(*ckpt.Meta("ae_channels"));
  c.autoencoder.bottleneck = MetaInt(ckpt, "ae_bottleneck");
  c.policy.actor_hidden = SplitInts(*ckpt.Meta("actor_hidden"));
  c.policy.critic_hidden = SplitInts(*ckpt.Meta("critic_hidden"));
  c.edge_border = MetaInt(ckpt, "edge_border");
  c.tick_steps = MetaInt(ckpt, "tick_steps");
  c.Harmonize();
  return c;
}

Agent Agent::FromCheckpoint(const Checkpoint& ckpt) {
  Agent a(AgentConfigFromCheckpoint(ckpt), 0);
  a.op.Load(ckpt, "op");
  a.vp.Load(ckpt, "vp");
  ckpt.RestoreInto("him", a.him.stack());
  ckpt.RestoreInto("ae", a.ae.net());
  a.ac.Load(ckpt);
  return a;
}

DepthImage CaptureFrame(const World& world, const AgentConfig& config,
                        std::mt19937_64& rng) {
  DepthImage img =
      Render(world, config.camera, rng, true, config.randomization);
  if (config.edge_border > 0) img = EdgeTruncateResize(img, config.edge_border);
  img.stage = DepthStage::kRandomized;
  return img;
}

RobotPerception::RobotPerception(const AgentConfig& config)
    : tick_steps_(config.tick_steps),
      proprio_(config.estimator.history, config.estimator.obs_dim),
      depth_(config.estimator.depth_frames, config.estimator.depth_height,
             config.estimator.depth_width),
      hidden_op_(config.estimator.gru_hidden, 0.0),
      hidden_vp_(config.estimator.gru_hidden, 0.0),
      latent_(2 * config.estimator.latent, 0.0) {}

void RobotPerception::Reset() {
  proprio_.Reset();
  depth_.Reset();
  std::fill(hidden_op_.begin(), hidden_op_.end(), 0.0);
  std::fill(hidden_vp_.begin(), hidden_vp_.end(), 0.0);
  std::fill(latent_.begin(), latent_.end(), 0.0);
  last_obs_.clear();
  mask_ = 0;
  last_loss_ad_ = 0.0;
  selector_ = MakeSelector(selector_.beta, selector_.gamma);
  newest_stage_ = DepthStage::kRaw;
}

void RobotPerception::Observe(const Vec& obs) {
  proprio_.Push(obs);
  last_obs_ = obs;
}

void RobotPerception::Capture(const Agent& agent, const World& world,
                              std::mt19937_64& rng,
                              const FrameFilter& filter) {
  DepthImage img = CaptureFrame(world, agent.config(), rng);
  if (filter) img = filter(img);
  newest_stage_ = img.stage;
  depth_.Push(img);
}

void RobotPerception::Advance(const Agent& agent, int mask) {
  Require(mask == 0 || mask == 1, "mask must be 0 or 1");
  const Vec p = proprio_.Flatten();
  const Vec d = depth_.Flatten();
  op_out_ = agent.op.Forward(p, &d, hidden_op_);
  vp_out_ = agent.vp.Forward(p, &d, hidden_vp_);
  hidden_op_ = op_out_.gru_hidden;
  hidden_vp_ = vp_out_.gru_hidden;
  mask_ = mask;
  latent_ = FuseLatent(op_out_.h, vp_out_.h, mask);
}

void RobotPerception::Refresh(const Agent& agent, const World& world,
                              std::mt19937_64& rng, int mask,
                              const FrameFilter& filter) {
  Capture(agent, world, rng, filter);
  Advance(agent, mask);
}

void RobotPerception::RefreshWithSelector(const Agent& agent,
                                          const World& world,
                                          std::mt19937_64& rng, int step,
                                          const FrameFilter& filter) {
  Capture(agent, world, rng, filter);
  const Vec d = depth_.Flatten();
  last_loss_ad_ = LossAd(d, agent.ae.Reconstruct(d));
  // A zero-padded pair says nothing about the camera; hold the filter.
  if (depth_.warm()) {
    selector_ = FilterUpdate(selector_, last_loss_ad_, step);
  } else {
    selector_.switched = false;
  }
  Advance(agent, SelectorMask(selector_));
}

}  // namespace redest
