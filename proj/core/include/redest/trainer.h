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

// Joint training: rollouts under the estimator adaptation schedule, clipped
// policy-gradient updates, supervised estimator and autoencoder updates, the
// terrain curriculum and the two-phase command curriculum.

#ifndef REDEST_TRAINER_H_
#define REDEST_TRAINER_H_

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "redest/agent.h"
#include "redest/config.h"
#include "redest/policy.h"
#include "redest/terrain.h"
#include "redest/world.h"

namespace redest {

struct TrainConfig {
  std::uint64_t seed = 1;
  int num_envs = 64;
  int horizon = 48;
  int iterations = 100;
  int episode_steps = 500;
  // Env i trains on terrains[i % size].
  std::vector<TerrainKind> terrains{TerrainKind::kFlat};
  int start_level = 0;
  int flip_period = 20;

  AgentConfig agent;
  PpoConfig ppo;
  RewardScales rewards;
  CommandRanges commands;
  CurriculumRule curriculum;

  Real estimator_lr = 1e-3;
  Real autoencoder_lr = 1e-3;
  Real supervised_max_grad_norm = 10.0;
  // Upper bound on depth pairs per autoencoder step.
  int autoencoder_pairs = 128;

  // Phase 2 starts once the mean tracking reward over `phase_window`
  // iterations reaches phase_threshold, or at phase_budget of the run.
  Real phase_threshold = 0.7;
  int phase_window = 10;
  Real phase_budget = 0.6;

  // Write a checkpoint every n iterations (0: only at the end).
  int checkpoint_every = 0;

  // Stored in the checkpoint for deployment; a negative beta_override means
  // beta comes from calibration.
  Real selector_gamma = 0.1;
  Real beta_override = -1.0;

  // Reads every documented key; unknown keys are a contract error.
  static TrainConfig FromKeyValue(KeyValueConfig kv);
  static TrainConfig Load(const std::string& path);
  // Key-value text that FromKeyValue maps back to this config.
  std::string ToText() const;
};

// Masks of the online estimator adaptation: difficult terrains always use
// vision (mask 0); simple terrains use (floor(it / period) mod 2) XOR their
// phase offset. Offsets alternate across the simple envs.
class AdaptationSchedule {
 public:
  AdaptationSchedule(const std::vector<TerrainKind>& env_terrain,
                     int flip_period);

  int Mask(int env, int iteration) const;
  int num_envs() const { return static_cast<int>(terrain_.size()); }
  TerrainKind terrain(int env) const { return terrain_[env]; }
  int offset(int env) const { return offset_[env]; }
  int flip_period() const { return period_; }

 private:
  std::vector<TerrainKind> terrain_;
  std::vector<int> offset_;
  int period_;
};

struct StepRecord {
  Vec actor_in;
  Vec critic_in;
  Vec action;
  Real log_prob = 0.0;
  Real value = 0.0;
  Real next_value = 0.0;
  Real reward = 0.0;
  Real lin_vel_raw = 0.0;
  std::uint8_t end = 0;
  std::uint8_t terminated = 0;
};

// Inputs and targets of one estimator refresh.
struct TickRecord {
  int env = 0;
  int mask = 0;
  Vec proprio;
  Vec depth;
  bool depth_warm = false;
  DepthStage depth_stage = DepthStage::kRaw;
  Vec hidden_op;
  Vec hidden_vp;
  PrivilegedInfo truth;
  Vec next_obs;
};

struct RolloutBuffer {
  int num_envs = 0;
  int horizon = 0;
  // steps[env][t]
  std::vector<std::vector<StepRecord>> steps;
  std::vector<TickRecord> ticks;
  int episodes_finished = 0;

  size_t size() const;
};

// Raised when a non-finite value appears during collection. The message
// holds the diagnostic dump.
class RolloutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainEnv {
 public:
  TrainEnv(int index, TerrainKind kind, int level, const AgentConfig& agent,
           std::uint64_t seed);

  // New terrain at the current level, new command for `phase`.
  void Reset(int phase, const CommandRanges& ranges);

  int index() const { return index_; }
  TerrainKind kind() const { return kind_; }
  int level() const { return level_; }
  void set_level(int level) { level_ = level; }
  World& world() { return *world_; }
  const World& world() const { return *world_; }
  RobotPerception& perception() { return perception_; }
  std::mt19937_64& rng() { return rng_; }
  int episode_step() const { return episode_step_; }
  void advance_step() { ++episode_step_; }

 private:
  int index_;
  TerrainKind kind_;
  int level_;
  std::mt19937_64 rng_;
  std::unique_ptr<World> world_;
  RobotPerception perception_;
  int episode_step_ = 0;
};

struct EpisodeSummary {
  int env = 0;
  Real distance = 0.0;
  Real commanded_distance = 0.0;
  int level_before = 0;
  int level_after = 0;
};

struct CollectStats {
  Real mean_reward = 0.0;
  Real mean_lin_vel = 0.0;
  std::vector<EpisodeSummary> episodes;
};

// Runs every env for `horizon` steps with the given masks. Episodes that end
// are finished through the curriculum and reset with commands of `phase`.
RolloutBuffer CollectRollout(Agent& agent, std::vector<TrainEnv>& envs,
                             const std::vector<int>& masks,
                             const TrainConfig& config, int phase,
                             CollectStats* stats);

// GAE over each env's steps, flattened env-major.
std::vector<PpoSample> BuildPpoSamples(const RolloutBuffer& buffer,
                                       Real discount, Real lambda);

struct SupervisedStats {
  Real loss_op = 0.0;
  Real loss_vp = 0.0;
  Real loss_ad = 0.0;
  int op_records = 0;
  int vp_records = 0;
  int ae_pairs = 0;
};

// One optimizer step each for the OP estimator (all ticks), the VP estimator
// (ticks with mask 0), the target encoder and the autoencoder (warm pairs of
// randomized-stage frames only).
SupervisedStats SupervisedUpdate(Agent& agent, const RolloutBuffer& buffer,
                                 const TrainConfig& config,
                                 std::mt19937_64& rng);

// Two-phase command curriculum; phase 2 is permanent once reached.
class PhaseLatch {
 public:
  PhaseLatch(Real threshold, int window, int budget_iteration);
  int Advance(int iteration, Real tracking_reward);
  int phase() const { return phase_; }

 private:
  Real threshold_;
  int window_;
  int budget_;
  int phase_ = 1;
  std::deque<Real> recent_;
};

struct IterationMetrics {
  int iteration = 0;
  int phase = 1;
  Real mean_reward = 0.0;
  Real mean_lin_vel = 0.0;
  int episodes = 0;
  Real mean_level = 0.0;
  Real mask_ratio = 0.0;
  SupervisedStats supervised;
  PpoStats ppo;
};

inline constexpr int kMetricsSchemaVersion = 1;
std::string MetricsCsvHeader();
std::string MetricsCsvRow(const IterationMetrics& m);

class Trainer {
 public:
  // Harmonizes the agent widths of `config` before building anything.
  explicit Trainer(const TrainConfig& config);

  IterationMetrics Iterate();

  // Runs the remaining iterations, writing metrics.csv, masks.csv and
  // checkpoints under out_dir. On a failure the iteration and message go to
  // failure.txt before the error propagates.
  void Train(const std::string& out_dir);

  Checkpoint MakeCheckpoint() const;

  Agent& agent() { return agent_; }
  const TrainConfig& config() const { return config_; }
  const AdaptationSchedule& schedule() const { return schedule_; }
  const std::vector<int>& last_masks() const { return masks_; }
  int iteration() const { return iteration_; }
  int phase() const { return phase_.phase(); }
  std::vector<TrainEnv>& envs() { return envs_; }

 private:
  TrainConfig config_;
  Agent agent_;
  AdaptationSchedule schedule_;
  std::vector<TrainEnv> envs_;
  PhaseLatch phase_;
  std::mt19937_64 rng_;
  std::vector<int> masks_;
  int iteration_ = 0;
};

}  // namespace redest

#endif  // REDEST_TRAINER_H_
