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

#include "redest/world.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "redest/error.h"

namespace redest {
namespace {

constexpr Real kPi = std::numbers::pi_v<Real>;

Real Clamp(Real v, Real lim) { return std::clamp(v, -lim, lim); }

}  // namespace

Vec PrivilegedInfo::Flat() const {
  Vec out;
  out.reserve(2 + kProfileSamples + 2);
  out.insert(out.end(), v_true.begin(), v_true.end());
  out.insert(out.end(), m_t.begin(), m_t.end());
  out.insert(out.end(), h_f.begin(), h_f.end());
  return out;
}

std::string EventToJson(const Event& e) {
  nlohmann::json j;
  j["step"] = e.step;
  j["type"] = e.type;
  j["x"] = e.x;
  j["value"] = e.value;
  return j.dump();
}

World::World(Heightfield terrain, Command command, std::uint64_t seed,
             const WorldParams& params)
    : terrain_(std::move(terrain)), command_(command), params_(params) {
  Require(terrain_.num_cells() > 0, "world needs a non-empty terrain");
  min_height_ = terrain_.MinHeight();
  Reset(seed);
}

void World::Reset(std::uint64_t seed) {
  rng_.seed(seed);
  robot_ = RobotState{};
  robot_.feet_offsets = {params_.foot_offset, -params_.foot_offset};
  drag_ = std::uniform_real_distribution<Real>(params_.drag_min,
                                               params_.drag_max)(rng_);
  robot_.phase = std::uniform_real_distribution<Real>(0.0, 2.0 * kPi)(rng_);
  robot_.x = 0.0;
  Real support = 0.0;
  Require(Support(robot_.x, &support), "robot must start over solid ground");
  robot_.z = support + params_.stand_height;
  start_x_ = robot_.x;
  step_ = 0;
  terminated_ = false;
  last_collision_ = false;
  takeoff_z_ = robot_.z;
  UpdateGait();
  robot_.joint_acc = {};
}

bool World::Support(Real x, Real* h) const {
  bool any = false;
  for (Real off : robot_.feet_offsets) {
    if (terrain_.IsVoid(x + off)) continue;
    const Real hh = terrain_.HeightAt(x + off);
    *h = any ? std::max(*h, hh) : hh;
    any = true;
  }
  return any;
}

void World::UpdateGait() {
  const Real omega = 2.0 * kPi *
                     (params_.gait_base_hz +
                      params_.gait_hz_per_mps * std::abs(robot_.vx));
  robot_.phase = std::fmod(robot_.phase + omega * params_.dt, 2.0 * kPi);
  for (int i = 0; i < kNumJoints; ++i) {
    const Real arg = robot_.phase + 0.5 * kPi * i;
    const Real qd = params_.joint_amplitude * omega * std::cos(arg);
    robot_.joint_acc[i] = (qd - robot_.joint_vel[i]) / params_.dt;
    robot_.joint_vel[i] = qd;
    robot_.joint_proxy[i] = params_.joint_amplitude * std::sin(arg);
  }
}

StepResult World::Step(const Action& action) {
  for (Real a : action) {
    Require(std::isfinite(a), "action must be finite");
    Require(std::abs(a) <= 1.0, "action components must lie in [-1, 1]");
  }
  Require(!terminated_, "step called on a terminated world");
  const WorldParams& p = params_;
  StepResult out;
  RobotState& r = robot_;
  const Real vx0 = r.vx, vz0 = r.vz;
  auto emit = [&](const char* type, Real value) {
    out.events.push_back({step_, type, r.x, value});
  };

  if (!r.airborne) {
    r.vx += (action[0] * p.accel_max - drag_ * r.vx) * p.dt;
    if (action[1] > p.hop_threshold) {
      r.airborne = true;
      r.vz = action[1] * p.v_hop;
      takeoff_z_ = r.z;
      emit("hop", r.vz);
    }
  }

  const Real lead = r.vx >= 0.0 ? p.foot_offset : -p.foot_offset;
  const Real x_new = r.x + r.vx * p.dt;

  if (!r.airborne) {
    const Real foot_z = r.z - p.stand_height;
    const Real xl = x_new + lead;
    if (!terrain_.IsVoid(xl) &&
        terrain_.CellIndex(xl) != terrain_.CellIndex(r.x + lead) &&
        terrain_.HeightAt(xl) - foot_z > p.max_step) {
      out.collision = true;
      r.vx = 0.0;
      emit("collision", terrain_.HeightAt(xl) - foot_z);
    } else {
      r.x = x_new;
    }
    Real support = 0.0;
    if (!Support(r.x, &support)) {
      terminated_ = true;
      emit("fall", 0.0);
    } else if (support < foot_z - p.max_step) {
      r.airborne = true;
      r.vz = 0.0;
      takeoff_z_ = r.z;
      emit("ledge", foot_z - support);
    } else {
      r.z = support + p.stand_height;
    }
  } else {
    // Exact constant-gravity integration.
    const Real z_new = r.z + r.vz * p.dt - 0.5 * p.gravity * p.dt * p.dt;
    const Real vz_new = r.vz - p.gravity * p.dt;
    if (r.vz > 0.0 && vz_new <= 0.0) {
      const Real apex = r.z + r.vz * r.vz / (2.0 * p.gravity);
      emit("apex", apex - takeoff_z_);
    }
    const Real foot_new = z_new - p.stand_height;
    const Real xl = x_new + lead;
    if (!terrain_.IsVoid(xl) &&
        terrain_.CellIndex(xl) != terrain_.CellIndex(r.x + lead) &&
        terrain_.HeightAt(xl) > foot_new) {
      out.collision = true;
      r.vx = 0.0;
      emit("collision", terrain_.HeightAt(xl) - foot_new);
    } else {
      r.x = x_new;
    }
    r.z = z_new;
    r.vz = vz_new;
    Real support = 0.0;
    if (Support(r.x, &support) && foot_new <= support && r.vz <= 0.0) {
      r.z = support + p.stand_height;
      r.vz = 0.0;
      r.airborne = false;
      r.vx *= p.landing_retention;
      emit("land", support);
    } else if (foot_new < min_height_ - p.fall_depth) {
      terminated_ = true;
      emit("fall", foot_new);
    }
  }

  // Pitch follows the line through the supporting feet.
  if (!r.airborne) {
    Real hf = 0.0, hr = 0.0;
    const bool fv = terrain_.IsVoid(r.x + r.feet_offsets[0]);
    const bool rv = terrain_.IsVoid(r.x + r.feet_offsets[1]);
    if (!fv) hf = terrain_.HeightAt(r.x + r.feet_offsets[0]);
    if (!rv) hr = terrain_.HeightAt(r.x + r.feet_offsets[1]);
    if (fv) hf = hr;
    if (rv) hr = hf;
    const Real target = std::atan((hf - hr) / (2.0 * p.foot_offset));
    r.pitch_rate = p.pitch_gain * (target - r.pitch);
  } else {
    r.pitch_rate *= 0.9;
  }
  r.pitch += r.pitch_rate * p.dt;
  if (std::abs(r.pitch) >= 0.45 * kPi && !terminated_) {
    terminated_ = true;
    emit("flip", r.pitch);
  }
  if (r.x + p.profile_max + p.foot_offset >= terrain_.end_x() && !terminated_) {
    terminated_ = true;
    emit("end_of_terrain", r.x);
  }

  r.acc_x = (r.vx - vx0) / p.dt;
  r.acc_z = (r.vz - vz0) / p.dt;
  UpdateGait();
  r.last_action = action;
  last_collision_ = out.collision;
  ++step_;
  out.terminated = terminated_;
  return out;
}

Vec World::Observation() const {
  const RobotState& r = robot_;
  Vec o;
  o.reserve(kObsDim);
  o.push_back(Clamp(0.1 * r.acc_x, 5.0));
  o.push_back(Clamp(0.02 * r.acc_z, 5.0));
  o.push_back(Clamp(0.25 * r.pitch_rate, 5.0));
  o.push_back(std::sin(r.pitch));
  o.push_back(std::cos(r.pitch));
  o.push_back(command_.c_x);
  o.push_back(std::cos(command_.c_yaw));
  o.push_back(std::sin(command_.c_yaw));
  for (Real q : r.joint_proxy) o.push_back(q);
  for (Real a : r.last_action) o.push_back(a);
  return o;
}

std::array<Real, kProfileSamples> World::ProfileAbscissae() const {
  std::array<Real, kProfileSamples> xs{};
  const Real span = params_.profile_max - params_.profile_min;
  for (int k = 0; k < kProfileSamples; ++k) {
    xs[k] = robot_.x + params_.profile_min + span * k / (kProfileSamples - 1);
  }
  return xs;
}

Real World::FootClearance(int foot) const {
  const Real xf = robot_.x + robot_.feet_offsets[foot];
  const Real foot_z = robot_.z - params_.stand_height;
  const int n = params_.foot_patch_samples;
  Real sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const Real xs =
        xf + params_.foot_patch * (static_cast<Real>(j) / (n - 1) - 0.5);
    sum += terrain_.IsVoid(xs)
               ? kMaxClearance
               : std::min(foot_z - terrain_.HeightAt(xs), kMaxClearance);
  }
  return sum / n;
}

PrivilegedInfo World::Privileged() const {
  PrivilegedInfo info;
  info.v_true = {robot_.vx, robot_.vz};
  const auto xs = ProfileAbscissae();
  for (int k = 0; k < kProfileSamples; ++k) {
    info.m_t[k] = terrain_.IsVoid(xs[k])
                      ? kMaxClearance
                      : Clamp(robot_.z - terrain_.HeightAt(xs[k]), kMaxClearance);
  }
  info.h_f = {FootClearance(0), FootClearance(1)};
  return info;
}

Real World::KineticEnergy() const {
  return 0.5 * (robot_.vx * robot_.vx + robot_.vz * robot_.vz);
}

const RewardTerm& RewardBreakdown::Get(const std::string& name) const {
  for (const RewardTerm& t : terms) {
    if (t.name == name) return t;
  }
  throw ContractError("no reward term named '" + name + "'");
}

Real LinVelReward(Real c_x, Real v_dot_n, Real v_norm) {
  if (c_x == 0.0) return 1.0 / (1.0 + v_norm);
  return std::min(v_dot_n, c_x) / (c_x + 1e-5);
}

RewardBreakdown ComputeReward(const World& before, const World& after,
                              const Action& action, const Command& command,
                              const RewardScales& s) {
  return ComputeReward(before.robot(), after, action, command, s);
}

RewardBreakdown ComputeReward(const RobotState& r0, const World& after,
                              const Action& action, const Command& command,
                              const RewardScales& s) {
  const RobotState& r1 = after.robot();
  const Real dt = after.params().dt;
  const Real v_dot_n = r1.vx * std::cos(command.c_yaw);

  Real energy = 0.0, jacc = 0.0;
  const Real torque = after.params().torque_scale * action[0];
  for (int i = 0; i < kNumJoints; ++i) {
    energy += std::abs(torque * r1.joint_vel[i]);
    jacc += r1.joint_acc[i] * r1.joint_acc[i];
  }
  const Real da0 = action[0] - r0.last_action[0];
  const Real da1 = action[1] - r0.last_action[1];
  const Real sp = std::sin(r1.pitch);

  RewardBreakdown b;
  auto add = [&](const char* name, Real raw, Real scale, bool inapplicable) {
    RewardTerm t{name, raw, scale, raw * scale * dt, inapplicable};
    b.total += t.weighted;
    b.terms.push_back(t);
  };
  add("lin_vel", LinVelReward(command.c_x, v_dot_n, std::abs(r1.vx)),
      s.lin_vel, false);
  add("ang_vel", std::exp(-r1.pitch_rate * r1.pitch_rate / 0.25), s.ang_vel,
      false);
  add("collision", after.last_collision() ? 1.0 : 0.0, s.collision, false);
  add("joint_energy", energy, s.joint_energy, false);
  add("action_rate", da0 * da0 + da1 * da1, s.action_rate, false);
  add("default_pos", action[0] * action[0] + action[1] * action[1],
      s.default_pos, false);
  add("hip_pos", 0.0, s.hip_pos, true);
  add("joint_acc", jacc, s.joint_acc, false);
  add("orientation", sp * sp, s.orientation, false);
  return b;
}

Command SampleCommand(std::mt19937_64& rng, int phase,
                      const CommandRanges& ranges) {
  Require(phase == 1 || phase == 2, "curriculum phase must be 1 or 2");
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  Command c;
  if (phase == 1) {
    c.c_x = ranges.phase1_min + (ranges.max - ranges.phase1_min) * unit(rng);
  } else if (unit(rng) < ranges.p_zero) {
    c.c_x = 0.0;
  } else {
    c.c_x = ranges.phase2_min + (ranges.max - ranges.phase2_min) * unit(rng);
  }
  c.c_yaw = ranges.yaw_range * (2.0 * unit(rng) - 1.0);
  c.zero_flag = c.c_x == 0.0;
  return c;
}

int UpdateCurriculum(int level, const EpisodeOutcome& outcome,
                     const CurriculumRule& rule) {
  Require(level >= 0 && level < kNumLevels, "curriculum level out of range");
  if (!(outcome.commanded_distance > 0.0)) return level;
  const Real ratio = outcome.distance / outcome.commanded_distance;
  if (ratio >= rule.promote_ratio) return std::min(level + 1, kNumLevels - 1);
  if (ratio < rule.demote_ratio) return std::max(level - 1, 0);
  return level;
}

}  // namespace redest
