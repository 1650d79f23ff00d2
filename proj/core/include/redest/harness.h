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

// Experiment runners for a trained agent: deployment-noise robustness, the
// filter-coefficient sweep, switching traces, threshold calibration and
// detector separation.
//
// Deployment runs are deterministic: the policy acts with its mean action,
// and every robot draws from its own seeded generator.

#ifndef REDEST_HARNESS_H_
#define REDEST_HARNESS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "redest/agent.h"
#include "redest/selector.h"
#include "redest/terrain.h"

namespace redest {

enum class NoiseKind { kNone, kGaussian, kSaltPepper, kOcclusion };
const char* NoiseKindName(NoiseKind kind);
NoiseKind NoiseKindFromName(const std::string& name);

struct NoiseEvent {
  NoiseKind kind = NoiseKind::kNone;
  Real level = 0.0;  // percent
  int onset_step = 0;
  int end_step = -1;  // exclusive; -1 runs to the end
  bool Active(int step) const;
};

// Short label such as "GA30" or "SP70".
std::string NoiseLabel(NoiseKind kind, Real level);

// Frame corruption of `event` applied to one captured frame.
DepthImage ApplyNoise(const DepthImage& image, const NoiseEvent& event,
                      std::mt19937_64& rng);

struct ExperimentSpec {
  std::string name = "experiment";
  TerrainKind terrain = TerrainKind::kFlat;
  int level = 0;
  int robots = 20;
  Real command = 0.6;
  int steps = 450;
  std::vector<NoiseEvent> events;
  Real beta = 0.0;
  Real gamma = 0.1;
  std::uint64_t seed = 1;

  // Onsets within the episode, levels in [0, 100], positive sizes.
  void Validate() const;
};

enum class Arm { kVpOnly, kRenet };
const char* ArmName(Arm arm);

struct TickTrace {
  int step = 0;
  Real loss_ad = 0.0;
  Real P = 1.0;
  Mode mode = Mode::kVp;
  bool switched = false;
};

struct StepTrace {
  int step = 0;
  Real x = 0.0, z = 0.0, vx = 0.0, reward = 0.0;
};

struct RobotRun {
  std::vector<TickTrace> ticks;
  std::vector<StepTrace> steps;
  // Forward velocity per step; zero after a termination.
  std::vector<Real> velocity;
  // Step of the first fall or flip, -1 if none.
  int terminated_step = -1;
  std::string termination;
};

// Runs one robot under `arm` for spec.steps steps.
RobotRun RunRobot(const Agent& agent, const ExperimentSpec& spec, Arm arm,
                  int robot);

struct ArmSummary {
  // Mean forward velocity across robots, per step.
  std::vector<Real> mean_velocity;
  Real pre_noise_velocity = 0.0;   // steps [50, onset)
  Real post_noise_velocity = 0.0;  // steps [200, 400)
  // Mean |<v, n> - c_x| over steps [200, 400) and robots, and its part
  // above the command.
  Real tracking_error = 0.0;
  Real overshoot = 0.0;
  // Largest, over robots, number of selector ticks from onset to the first
  // OP decision; -1 if some robot never switches.
  int max_switch_delay_ticks = -1;
  // Fraction of post-onset ticks spent in OP mode.
  Real op_fraction_after_onset = 0.0;
  int falls = 0;
  std::vector<RobotRun> runs;
};

ArmSummary SummarizeArm(const ExperimentSpec& spec,
                        std::vector<RobotRun> runs);

struct NoiseCondition {
  NoiseKind kind;
  Real level;
};

// GA 30/70/100 and SP 10/30/70.
std::vector<NoiseCondition> DefaultNoiseConditions();

struct ConditionResult {
  NoiseCondition condition;
  ArmSummary vp_only;
  ArmSummary renet;
};

inline constexpr int kNoiseOnsetStep = 150;

// For each condition, both arms with noise starting at `onset`.
std::vector<ConditionResult> RunNoiseRobustness(
    const Agent& agent, const ExperimentSpec& base,
    const std::vector<NoiseCondition>& conditions,
    int onset = kNoiseOnsetStep);

inline constexpr int kHarnessSchemaVersion = 1;

// schema,condition,arm,step,mean_velocity
void WriteVelocityCsv(std::ostream& os,
                      const std::vector<ConditionResult>& results);
// schema,condition,arm,pre_noise_velocity,post_noise_velocity,
// tracking_error,overshoot,max_switch_delay_ticks,op_fraction_after_onset,
// falls
void WriteNoiseSummaryCsv(std::ostream& os,
                          const std::vector<ConditionResult>& results);

// One JSON line per tick, then one per step.
void WriteTraceJsonl(std::ostream& os, const RobotRun& run, Real beta);

// Filter-coefficient sweep over a recorded loss sequence.
struct ScriptedTimeline {
  int ticks = 0;
  std::vector<NoiseEvent> segments;  // in ticks, sustained noise
  std::vector<int> glitch_ticks;     // single corrupted frames
};

// Clean stretches with sparse single-frame glitches and sustained
// salt-and-pepper segments separated by long clean guards.
ScriptedTimeline DefaultTimeline(std::uint64_t seed);

struct LossRecording {
  std::vector<Real> losses;  // one per tick
  std::vector<int> onsets;   // ticks where sustained noise begins
};

// Replays the timeline through one robot walking in VP mode and records the
// reconstruction loss of every tick.
LossRecording RecordTimeline(const Agent& agent, const ExperimentSpec& spec,
                             const ScriptedTimeline& timeline);

struct SweepRow {
  Real gamma = 0.0;
  Real mean_delay_ticks = 0.0;
  int max_delay_ticks = 0;
  int predicted_delay_ticks = 0;
  int switch_count = 0;
};

// Runs the filter with each gamma over the same losses. Delay is the tick
// count from an onset (inclusive) to the first OP decision.
std::vector<SweepRow> SweepGamma(const LossRecording& rec, Real beta,
                                 const std::vector<Real>& gammas);
std::vector<Real> DefaultGammas();
// schema,gamma,mean_delay_ticks,mean_delay_s,max_delay_ticks,
// predicted_delay_ticks,switch_count
void WriteSweepCsv(std::ostream& os, const std::vector<SweepRow>& rows,
                   Real tick_seconds);

// Reconstruction losses of warm clean pairs over `episodes` episodes in VP
// mode, kept only for episodes without a fall or flip.
struct CleanLossSample {
  std::vector<Real> losses;
  int episodes = 0;
  int successful = 0;
};
CleanLossSample CollectCleanLosses(const Agent& agent,
                                   const std::vector<TerrainKind>& terrains,
                                   int level, int episodes, int steps,
                                   std::uint64_t seed);

struct SeparationReport {
  int frames = 0;
  Real clean_below = 0.0;       // fraction of clean pairs with loss < beta
  Real salt_pepper_above = 0.0;  // SP 70, fraction with loss >= beta
  Real occlusion_above = 0.0;    // full occlusion, fraction >= beta
  Real median_clean = 0.0;
  Real median_salt_pepper = 0.0;
};

// Held-out clean pairs and their corrupted copies.
SeparationReport MeasureSeparation(const Agent& agent, Real beta,
                                   const std::vector<TerrainKind>& terrains,
                                   int level, int episodes, int steps,
                                   std::uint64_t seed);

}  // namespace redest

#endif  // REDEST_HARNESS_H_
