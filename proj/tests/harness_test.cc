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

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "redest/error.h"
#include "redest/harness.h"

namespace redest {
namespace {

AgentConfig DefaultAgentConfig() {
  AgentConfig c;
  c.Harmonize();
  return c;
}

const Agent& TestAgent() {
  static const Agent agent(DefaultAgentConfig(), 17);
  return agent;
}

ExperimentSpec ShortSpec() {
  ExperimentSpec s;
  s.robots = 2;
  s.steps = 60;
  s.beta = 1e9;
  s.seed = 5;
  return s;
}

TEST(Noise, NamesRoundTrip) {
  for (NoiseKind k : {NoiseKind::kNone, NoiseKind::kGaussian,
                      NoiseKind::kSaltPepper, NoiseKind::kOcclusion}) {
    EXPECT_EQ(NoiseKindFromName(NoiseKindName(k)), k);
  }
  EXPECT_THROW(NoiseKindFromName("fog"), ContractError);
  EXPECT_EQ(NoiseLabel(NoiseKind::kGaussian, 30), "GA30");
  EXPECT_EQ(NoiseLabel(NoiseKind::kSaltPepper, 70), "SP70");
}

TEST(Noise, EventWindow) {
  const NoiseEvent open{NoiseKind::kGaussian, 30, 150, -1};
  EXPECT_FALSE(open.Active(149));
  EXPECT_TRUE(open.Active(150));
  EXPECT_TRUE(open.Active(100000));
  const NoiseEvent closed{NoiseKind::kSaltPepper, 70, 10, 12};
  EXPECT_TRUE(closed.Active(11));
  EXPECT_FALSE(closed.Active(12));
  EXPECT_FALSE((NoiseEvent{NoiseKind::kNone, 0, 0, -1}).Active(5));
}

TEST(Noise, ApplyMarksDeploymentStage) {
  DepthImage img;
  img.height = 4;
  img.width = 5;
  img.data.assign(20, 1.0);
  img.stage = DepthStage::kRandomized;
  std::mt19937_64 rng(1);
  EXPECT_EQ(ApplyNoise(img, {NoiseKind::kNone, 0, 0, -1}, rng).data, img.data);
  const DepthImage occ = ApplyNoise(img, {NoiseKind::kOcclusion, 100, 0, -1}, rng);
  EXPECT_EQ(occ.stage, DepthStage::kDeploymentNoised);
  for (Real d : occ.data) EXPECT_EQ(d, kMinRange);
  const DepthImage sp = ApplyNoise(img, {NoiseKind::kSaltPepper, 50, 0, -1}, rng);
  int changed = 0;
  for (size_t i = 0; i < sp.data.size(); ++i) changed += sp.data[i] != 1.0;
  EXPECT_EQ(changed, 10);
}

TEST(Spec, ValidateRejectsBadEvents) {
  ExperimentSpec s = ShortSpec();
  EXPECT_NO_THROW(s.Validate());
  s.events = {{NoiseKind::kGaussian, 30, 60, -1}};
  EXPECT_THROW(s.Validate(), ContractError);
  s.events = {{NoiseKind::kGaussian, 130, 10, -1}};
  EXPECT_THROW(s.Validate(), ContractError);
  s.events = {};
  s.robots = 0;
  EXPECT_THROW(s.Validate(), ContractError);
  s.robots = 1;
  s.gamma = 0.0;
  EXPECT_THROW(s.Validate(), ContractError);
}

TEST(Run, ShapesAndDeterminism) {
  ExperimentSpec s = ShortSpec();
  s.events = {{NoiseKind::kSaltPepper, 70, 20, -1}};
  const RobotRun a = RunRobot(TestAgent(), s, Arm::kRenet, 0);
  const RobotRun b = RunRobot(TestAgent(), s, Arm::kRenet, 0);
  EXPECT_EQ(a.velocity.size(), 60u);
  EXPECT_EQ(a.velocity, b.velocity);
  ASSERT_EQ(a.ticks.size(), b.ticks.size());
  for (size_t k = 0; k < a.ticks.size(); ++k) {
    EXPECT_EQ(a.ticks[k].loss_ad, b.ticks[k].loss_ad);
    EXPECT_EQ(a.ticks[k].step % 5, 0);
  }
  if (a.terminated_step < 0) {
    EXPECT_EQ(a.ticks.size(), 12u);
    EXPECT_EQ(a.steps.size(), 60u);
  }
  const RobotRun other = RunRobot(TestAgent(), s, Arm::kRenet, 1);
  EXPECT_NE(other.ticks[1].loss_ad, a.ticks[1].loss_ad);
}

TEST(Run, ArmsCoincideWhileTheSelectorStaysInVision) {
  const ExperimentSpec s = ShortSpec();
  const RobotRun vp = RunRobot(TestAgent(), s, Arm::kVpOnly, 0);
  const RobotRun re = RunRobot(TestAgent(), s, Arm::kRenet, 0);
  EXPECT_EQ(vp.velocity, re.velocity);
  for (const TickTrace& t : re.ticks) EXPECT_EQ(t.mode, Mode::kVp);
}

TEST(Run, ZeroThresholdSwitchesAfterPredictedTicks) {
  ExperimentSpec s = ShortSpec();
  s.beta = 0.0;
  const RobotRun re = RunRobot(TestAgent(), s, Arm::kRenet, 0);
  ASSERT_GE(re.ticks.size(), 9u);
  // Tick 0 pairs a frame with padding and leaves the filter alone.
  EXPECT_EQ(re.ticks[0].P, 1.0);
  for (int k = 1; k <= 7; ++k) {
    EXPECT_EQ(re.ticks[k].mode, k < 7 ? Mode::kVp : Mode::kOp) << k;
  }
  EXPECT_TRUE(re.ticks[7].switched);
  // The VP-only arm reports the same filter but never acts on it.
  const RobotRun vp = RunRobot(TestAgent(), s, Arm::kVpOnly, 0);
  EXPECT_EQ(vp.ticks[7].mode, Mode::kOp);
  EXPECT_EQ(vp.ticks[7].P, re.ticks[7].P);
}

RobotRun SyntheticRun(Real v, int steps, int op_from_step) {
  RobotRun r;
  r.velocity.assign(steps, v);
  for (int k = 0; k < steps; k += 5) {
    TickTrace t;
    t.step = k;
    t.mode = op_from_step >= 0 && k >= op_from_step ? Mode::kOp : Mode::kVp;
    r.ticks.push_back(t);
  }
  return r;
}

TEST(Summary, WindowsErrorsAndDelays) {
  ExperimentSpec s;
  s.steps = 450;
  s.command = 0.6;
  s.events = {{NoiseKind::kGaussian, 30, 150, -1}};
  RobotRun slow = SyntheticRun(0.4, 450, 180);
  for (int k = 0; k < 150; ++k) slow.velocity[k] = 0.8;
  RobotRun fast = SyntheticRun(0.9, 450, 150);
  fast.terminated_step = 420;
  fast.termination = "flip";
  const ArmSummary a = SummarizeArm(s, {slow, fast});
  EXPECT_NEAR(a.pre_noise_velocity, (0.8 + 0.9) / 2, 1e-12);
  EXPECT_NEAR(a.post_noise_velocity, (0.4 + 0.9) / 2, 1e-12);
  EXPECT_NEAR(a.tracking_error, (0.2 + 0.3) / 2, 1e-12);
  EXPECT_NEAR(a.overshoot, 0.3 / 2, 1e-12);
  // Onset tick counts as one: ticks at 150..180 are seven ticks.
  EXPECT_EQ(a.max_switch_delay_ticks, 7);
  EXPECT_EQ(a.falls, 1);
  const int post_ticks = (450 - 150) / 5;
  EXPECT_NEAR(a.op_fraction_after_onset,
              (post_ticks - 6 + post_ticks) / (2.0 * post_ticks), 1e-12);
  const ArmSummary never = SummarizeArm(s, {SyntheticRun(0.6, 450, -1)});
  EXPECT_EQ(never.max_switch_delay_ticks, -1);
  EXPECT_EQ(never.tracking_error, 0.0);
}

TEST(Sweep, StepInputDelaysMatchRecurrence) {
  LossRecording rec;
  rec.losses.assign(200, 0.1);
  for (int k = 60; k < 200; ++k) rec.losses[k] = 5.0;
  rec.onsets = {60};
  const auto rows = SweepGamma(rec, 1.0, DefaultGammas());
  int prev = std::numeric_limits<int>::max();
  for (const SweepRow& r : rows) {
    EXPECT_EQ(r.max_delay_ticks, PredictedFlipTicks(r.gamma));
    EXPECT_EQ(r.max_delay_ticks, r.predicted_delay_ticks);
    EXPECT_LE(r.max_delay_ticks, prev);
    prev = r.max_delay_ticks;
    EXPECT_EQ(r.switch_count, 1);
  }
  EXPECT_EQ(rows.front().gamma, 0.05);
  EXPECT_EQ(rows.back().max_delay_ticks, 1);
}

TEST(Sweep, GlitchesOnlyFlipTheUnfilteredSelector) {
  LossRecording rec;
  rec.losses.assign(300, 0.1);
  for (int g : {20, 45, 90, 130}) rec.losses[g] = 5.0;
  for (int k = 200; k < 250; ++k) rec.losses[k] = 5.0;
  rec.onsets = {200};
  const auto rows = SweepGamma(rec, 1.0, {0.1, 1.0});
  EXPECT_EQ(rows[0].switch_count, 2);
  EXPECT_EQ(rows[1].switch_count, 10);
  EXPECT_LT(rows[0].switch_count, rows[1].switch_count);
  LossRecording never = rec;
  never.onsets = {10};
  for (Real& l : never.losses) l = 0.1;
  EXPECT_THROW(SweepGamma(never, 1.0, {0.1}), ContractError);
}

TEST(Sweep, DefaultTimelineKeepsGuardsClean) {
  const ScriptedTimeline t = DefaultTimeline(3);
  EXPECT_EQ(t.segments.size(), 3u);
  EXPECT_FALSE(t.glitch_ticks.empty());
  for (int g : t.glitch_ticks) {
    EXPECT_GE(g, 0);
    EXPECT_LT(g, t.ticks);
    for (const NoiseEvent& s : t.segments) {
      EXPECT_FALSE(g >= s.onset_step - 60 && g < s.end_step + 2) << g;
    }
  }
  EXPECT_EQ(DefaultTimeline(3).glitch_ticks, t.glitch_ticks);
}

TEST(Sweep, RecordingHasOneLossPerTick) {
  ScriptedTimeline t;
  t.ticks = 30;
  t.segments = {{NoiseKind::kSaltPepper, 70, 10, 20}};
  t.glitch_ticks = {4};
  const LossRecording rec = RecordTimeline(TestAgent(), ShortSpec(), t);
  ASSERT_EQ(rec.losses.size(), 30u);
  EXPECT_EQ(rec.onsets, std::vector<int>{10});
  for (Real l : rec.losses) EXPECT_TRUE(std::isfinite(l));
  // Corrupted pairs reconstruct worse than their clean neighbours.
  EXPECT_GT(rec.losses[12], rec.losses[8]);
}

TEST(Output, TraceLineCountAndSchema) {
  const RobotRun run = RunRobot(TestAgent(), ShortSpec(), Arm::kRenet, 0);
  std::ostringstream os;
  WriteTraceJsonl(os, run, 0.25);
  std::istringstream is(os.str());
  std::string line;
  size_t n = 0, ticks = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["schema"], kTraceSchemaVersion);
    if (j["kind"] == "tick") {
      ++ticks;
      EXPECT_EQ(j["beta"], 0.25);
      EXPECT_TRUE(j.contains("P") && j.contains("mode") && j.contains("loss_ad"));
    } else {
      EXPECT_TRUE(j.contains("x") && j.contains("vx") && j.contains("reward"));
    }
    ++n;
  }
  EXPECT_EQ(n, run.ticks.size() + run.steps.size());
  EXPECT_EQ(ticks, run.ticks.size());
}

TEST(Output, CsvTablesCarrySchema) {
  ExperimentSpec s = ShortSpec();
  s.robots = 1;
  s.steps = 30;
  const auto res = RunNoiseRobustness(
      TestAgent(), s, {{NoiseKind::kGaussian, 30}}, 10);
  ASSERT_EQ(res.size(), 1u);
  std::ostringstream v, m, w;
  WriteVelocityCsv(v, res);
  WriteNoiseSummaryCsv(m, res);
  WriteSweepCsv(w, {SweepRow{0.1, 7, 7, 7, 2}}, 0.1);
  for (const std::string& text : {v.str(), m.str(), w.str()}) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("schema,", 0), 0u);
    int rows = 0;
    while (std::getline(is, line)) {
      EXPECT_EQ(line.rfind(std::to_string(kHarnessSchemaVersion) + ",", 0), 0u);
      ++rows;
    }
    EXPECT_GT(rows, 0);
  }
  EXPECT_NE(m.str().find("GA30,vp_only"), std::string::npos);
  EXPECT_NE(m.str().find("GA30,renet"), std::string::npos);
  EXPECT_NE(w.str().find("0.1,7,0.7,7,7,2"), std::string::npos);
}

TEST(Calibration, CleanLossesAndSeparationAreConsistent) {
  const std::vector<TerrainKind> mix{TerrainKind::kFlat};
  const CleanLossSample c = CollectCleanLosses(TestAgent(), mix, 0, 2, 40, 3);
  EXPECT_EQ(c.episodes, 2);
  EXPECT_LE(c.successful, 2);
  for (Real l : c.losses) EXPECT_TRUE(std::isfinite(l) && l >= 0.0);
  const SeparationReport all =
      MeasureSeparation(TestAgent(), 1e9, mix, 0, 2, 40, 3);
  EXPECT_EQ(all.clean_below, all.frames > 0 ? 1.0 : 0.0);
  EXPECT_EQ(all.salt_pepper_above, 0.0);
  const SeparationReport none =
      MeasureSeparation(TestAgent(), 0.0, mix, 0, 2, 40, 3);
  EXPECT_EQ(none.frames, all.frames);
  EXPECT_EQ(none.clean_below, 0.0);
  if (none.frames > 0) EXPECT_EQ(none.occlusion_above, 1.0);
  EXPECT_THROW(CollectCleanLosses(TestAgent(), {}, 0, 2, 40, 3), ContractError);
}

TEST(Persistence, RestoredCheckpointReproducesEvaluation) {
  Checkpoint c;
  TestAgent().Save(c);
  std::stringstream ss;
  c.Write(ss);
  const Agent restored = Agent::FromCheckpoint(Checkpoint::Read(ss));
  ExperimentSpec s = ShortSpec();
  s.events = {{NoiseKind::kGaussian, 70, 20, -1}};
  s.beta = 0.5;
  const RobotRun a = RunRobot(TestAgent(), s, Arm::kRenet, 1);
  const RobotRun b = RunRobot(restored, s, Arm::kRenet, 1);
  EXPECT_EQ(a.velocity, b.velocity);
  std::ostringstream ta, tb;
  WriteTraceJsonl(ta, a, s.beta);
  WriteTraceJsonl(tb, b, s.beta);
  EXPECT_EQ(ta.str(), tb.str());
}

}  // namespace
}  // namespace redest
