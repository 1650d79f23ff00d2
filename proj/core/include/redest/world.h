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

// Planar hopping robot on a heightfield. The body carries two virtual feet at
// fixed horizontal offsets; while grounded it rides the higher of the two
// supports, while airborne it follows a closed-form ballistic arc.

#ifndef REDEST_WORLD_H_
#define REDEST_WORLD_H_

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "redest/nn.h"
#include "redest/terrain.h"

namespace redest {

inline constexpr int kObsDim = 14;
inline constexpr int kNumJoints = 4;
inline constexpr int kProfileSamples = 17;
inline constexpr Real kMaxClearance = 2.0;

using Action = std::array<Real, 2>;

struct WorldParams {
  Real dt = 0.02;
  Real gravity = 9.81;
  Real stand_height = 0.3;
  Real foot_offset = 0.2;
  Real max_step = 0.12;
  // a0 = 1 adds accel_max * dt to vx per step.
  Real accel_max = 5.0;
  // Linear drag coefficient, drawn per episode.
  Real drag_min = 1.5;
  Real drag_max = 3.0;
  // Takeoff speed is a1 * v_hop when a1 exceeds hop_threshold.
  Real v_hop = 3.2;
  Real hop_threshold = 0.5;
  // Fraction of vx kept on touchdown.
  Real landing_retention = 0.7;
  Real pitch_gain = 10.0;
  Real gait_base_hz = 1.0;
  Real gait_hz_per_mps = 2.5;
  Real joint_amplitude = 0.5;
  Real torque_scale = 20.0;
  Real fall_depth = 0.5;
  Real profile_min = -0.5;
  Real profile_max = 1.1;
  Real foot_patch = 0.05;
  int foot_patch_samples = 5;
};

struct Command {
  Real c_x = 0.0;
  Real c_yaw = 0.0;
  bool zero_flag = true;
};

struct RobotState {
  Real x = 0.0, z = 0.3;
  Real vx = 0.0, vz = 0.0;
  Real pitch = 0.0, pitch_rate = 0.0;
  bool airborne = false;
  std::array<Real, 2> feet_offsets{0.2, -0.2};  // front, rear
  Action last_action{0.0, 0.0};
  Real phase = 0.0;
  std::array<Real, kNumJoints> joint_proxy{};
  std::array<Real, kNumJoints> joint_vel{};
  std::array<Real, kNumJoints> joint_acc{};
  Real acc_x = 0.0, acc_z = 0.0;
};

struct PrivilegedInfo {
  std::array<Real, 2> v_true{0.0, 0.0};
  std::array<Real, kProfileSamples> m_t{};
  std::array<Real, 2> h_f{0.0, 0.0};  // front, rear

  // [v_true, m_t, h_f].
  Vec Flat() const;
};

struct Event {
  int step = 0;
  std::string type;  // hop, apex, land, collision, fall, ledge
  Real x = 0.0;
  Real value = 0.0;
};

std::string EventToJson(const Event& e);

struct StepResult {
  bool terminated = false;
  bool collision = false;
  std::vector<Event> events;
};

class World {
 public:
  World(Heightfield terrain, Command command, std::uint64_t seed,
        const WorldParams& params = {});

  // Errors on non-finite actions or components outside [-1, 1].
  StepResult Step(const Action& action);
  void Reset(std::uint64_t seed);

  const RobotState& robot() const { return robot_; }
  RobotState& mutable_robot() { return robot_; }
  const Heightfield& terrain() const { return terrain_; }
  const Command& command() const { return command_; }
  void set_command(const Command& c) { command_ = c; }
  const WorldParams& params() const { return params_; }
  int step_count() const { return step_; }
  bool terminated() const { return terminated_; }
  bool last_collision() const { return last_collision_; }
  Real drag() const { return drag_; }
  Real start_x() const { return start_x_; }
  Real distance() const { return robot_.x - start_x_; }

  // Proprioceptive observation o_t:
  // [acc_x, acc_z, pitch_rate, sin pitch, cos pitch, c_x, cos c_yaw,
  //  sin c_yaw, joint_proxy x4, last_action x2].
  Vec Observation() const;
  PrivilegedInfo Privileged() const;
  // Absolute abscissae of the height-profile samples.
  std::array<Real, kProfileSamples> ProfileAbscissae() const;
  // Mean clearance of a foot over its patch; void samples count as
  // kMaxClearance.
  Real FootClearance(int foot) const;
  Real KineticEnergy() const;

 private:
  // Max non-void height under the two feet, or false if both are void.
  bool Support(Real x, Real* h) const;
  void UpdateGait();

  Heightfield terrain_;
  Command command_;
  WorldParams params_;
  RobotState robot_;
  std::mt19937_64 rng_;
  Real drag_ = 2.0;
  Real start_x_ = 0.0;
  Real takeoff_z_ = 0.0;
  Real min_height_ = 0.0;
  int step_ = 0;
  bool terminated_ = false;
  bool last_collision_ = false;
};

struct RewardScales {
  Real lin_vel = 1.5;
  Real ang_vel = 0.5;
  Real collision = -10.0;
  Real joint_energy = -1e-5;
  Real action_rate = -0.1;
  Real default_pos = -0.04;
  Real hip_pos = -0.5;
  Real joint_acc = -2.5e-7;
  Real orientation = -1.0;
};

struct RewardTerm {
  std::string name;
  Real raw = 0.0;
  Real scale = 0.0;
  Real weighted = 0.0;  // raw * scale * dt
  // Emitted as zero because the planar robot has no counterpart.
  bool inapplicable = false;
};

struct RewardBreakdown {
  Real total = 0.0;
  std::vector<RewardTerm> terms;
  const RewardTerm& Get(const std::string& name) const;
};

// Velocity tracking term. For c_x = 0 it is 1 / (1 + |v|); otherwise
// min(<v, n_yaw>, c_x) / (c_x + 1e-5).
Real LinVelReward(Real c_x, Real v_dot_n, Real v_norm);

// `before` and `after` must be consecutive states of the same world.
RewardBreakdown ComputeReward(const RobotState& before, const World& after,
                              const Action& action, const Command& command,
                              const RewardScales& scales = {});
RewardBreakdown ComputeReward(const World& before, const World& after,
                              const Action& action, const Command& command,
                              const RewardScales& scales = {});

struct CommandRanges {
  Real phase1_min = 0.2;
  Real phase2_min = 0.0;
  Real max = 1.0;
  Real yaw_range = 0.3;
  // Phase 2 draws an exact zero command with this probability.
  Real p_zero = 0.1;
};

Command SampleCommand(std::mt19937_64& rng, int phase,
                      const CommandRanges& ranges = {});

struct CurriculumRule {
  Real promote_ratio = 0.8;
  Real demote_ratio = 0.4;
};

struct EpisodeOutcome {
  Real distance = 0.0;
  Real commanded_distance = 0.0;
};

int UpdateCurriculum(int level, const EpisodeOutcome& outcome,
                     const CurriculumRule& rule = {});

}  // namespace redest

#endif  // REDEST_WORLD_H_
