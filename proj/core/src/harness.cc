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

#include "redest/harness.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "redest/error.h"

namespace redest {
namespace {

std::uint64_t Mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr int kPreNoiseStart = 50;
constexpr int kPostStart = 200;
constexpr int kPostEnd = 400;

Real Median(std::vector<Real> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Real PairLoss(const Agent& agent, const DepthImage& newest,
              const DepthImage& older) {
  const EstimatorConfig& e = agent.config().estimator;
  DepthBuffer b(2, e.depth_height, e.depth_width);
  b.Push(older);
  b.Push(newest);
  const Vec d = b.Flatten();
  return LossAd(d, agent.ae.Reconstruct(d));
}

// One deterministic episode driven by the mean action. `on_tick` sees the
// perception state right after each refresh.
struct Episode {
  World world;
  RobotPerception perception;
  std::mt19937_64 rng;
};

Episode StartEpisode(const Agent& agent, TerrainKind terrain, int level,
                     const Command& cmd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::uint64_t terrain_seed = rng();
  const std::uint64_t world_seed = rng();
  Episode ep{World(GenerateTerrain(terrain, level, terrain_seed), cmd,
                   world_seed),
             RobotPerception(agent.config()), std::move(rng)};
  ep.perception.Observe(ep.world.Observation());
  return ep;
}

StepResult ActAndStep(const Agent& agent, Episode& ep, Real* reward) {
  const Vec mean =
      agent.ac.Mean(ActorInput(ep.perception.last_obs(), ep.perception.latent()));
  const Action a = ToWorldAction(mean);
  const RobotState before = ep.world.robot();
  const Command cmd = ep.world.command();
  const StepResult sr = ep.world.Step(a);
  if (reward) *reward = ComputeReward(before, ep.world, a, cmd).total;
  ep.perception.Observe(ep.world.Observation());
  return sr;
}

std::string TerminationType(const StepResult& sr) {
  for (const Event& e : sr.events) {
    if (e.type == "fall" || e.type == "flip" || e.type == "end_of_terrain") {
      return e.type;
    }
  }
  return "terminated";
}

}  // namespace

const char* NoiseKindName(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kSaltPepper: return "salt_pepper";
    case NoiseKind::kOcclusion: return "occlusion";
  }
  return "?";
}

NoiseKind NoiseKindFromName(const std::string& name) {
  for (NoiseKind k : {NoiseKind::kNone, NoiseKind::kGaussian,
                      NoiseKind::kSaltPepper, NoiseKind::kOcclusion}) {
    if (name == NoiseKindName(k)) return k;
  }
  throw ContractError("unknown noise kind '" + name + "'");
}

bool NoiseEvent::Active(int step) const {
  return kind != NoiseKind::kNone && step >= onset_step &&
         (end_step < 0 || step < end_step);
}

std::string NoiseLabel(NoiseKind kind, Real level) {
  std::ostringstream os;
  switch (kind) {
    case NoiseKind::kNone: return "clean";
    case NoiseKind::kGaussian: os << "GA"; break;
    case NoiseKind::kSaltPepper: os << "SP"; break;
    case NoiseKind::kOcclusion: return "OCC";
  }
  os << level;
  return os.str();
}

DepthImage ApplyNoise(const DepthImage& image, const NoiseEvent& event,
                      std::mt19937_64& rng) {
  switch (event.kind) {
    case NoiseKind::kNone: return image;
    case NoiseKind::kGaussian: return InjectGaussian(image, event.level, rng);
    case NoiseKind::kSaltPepper:
      return InjectSaltPepper(image, event.level, rng);
    case NoiseKind::kOcclusion: return FullOcclusion(image);
  }
  return image;
}

void ExperimentSpec::Validate() const {
  Require(robots >= 1 && steps >= 1, "experiment needs robots and steps");
  Require(level >= 0 && level < kNumLevels, "terrain level out of range");
  Require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  for (const NoiseEvent& e : events) {
    Require(e.onset_step >= 0 && e.onset_step < steps,
            "noise onset outside the episode");
    Require(e.level >= 0.0 && e.level <= 100.0,
            "noise level must be in [0, 100]");
  }
}

const char* ArmName(Arm arm) {
  return arm == Arm::kVpOnly ? "vp_only" : "renet";
}

RobotRun RunRobot(const Agent& agent, const ExperimentSpec& spec, Arm arm,
                  int robot) {
  spec.Validate();
  Command cmd;
  cmd.c_x = spec.command;
  cmd.c_yaw = 0.0;
  cmd.zero_flag = spec.command == 0.0;
  Episode ep = StartEpisode(agent, spec.terrain, spec.level, cmd,
                            Mix(spec.seed, static_cast<std::uint64_t>(robot)));
  std::mt19937_64 noise_rng(Mix(spec.seed, 1000003ULL + robot));
  RobotPerception& p = ep.perception;
  p.selector() = MakeSelector(spec.beta, spec.gamma);
  // The VP-only arm keeps its own filter for the trace only.
  SelectorState shadow = MakeSelector(spec.beta, spec.gamma);

  RobotRun run;
  bool done = false;
  for (int step = 0; step < spec.steps; ++step) {
    if (done) {
      run.velocity.push_back(0.0);
      continue;
    }
    if (p.TickDue(step)) {
      FrameFilter filter;
      for (const NoiseEvent& e : spec.events) {
        if (e.Active(step)) {
          filter = [&noise_rng, e](const DepthImage& img) {
            return ApplyNoise(img, e, noise_rng);
          };
        }
      }
      TickTrace t;
      t.step = step;
      if (arm == Arm::kRenet) {
        p.RefreshWithSelector(agent, ep.world, ep.rng, step, filter);
        t.loss_ad = p.last_loss_ad();
        t.P = p.selector().P;
        t.mode = p.selector().mode;
        t.switched = p.selector().switched;
      } else {
        p.Refresh(agent, ep.world, ep.rng, 0, filter);
        const Vec d = p.depth().Flatten();
        t.loss_ad = LossAd(d, agent.ae.Reconstruct(d));
        if (p.depth().warm()) shadow = FilterUpdate(shadow, t.loss_ad, step);
        t.P = shadow.P;
        t.mode = shadow.mode;
        t.switched = shadow.switched && p.depth().warm();
      }
      run.ticks.push_back(t);
    }
    StepTrace s;
    s.step = step;
    const StepResult sr = ActAndStep(agent, ep, &s.reward);
    const RobotState& r = ep.world.robot();
    s.x = r.x;
    s.z = r.z;
    s.vx = r.vx;
    run.steps.push_back(s);
    run.velocity.push_back(r.vx);
    if (sr.terminated) {
      done = true;
      run.terminated_step = step;
      run.termination = TerminationType(sr);
    }
  }
  return run;
}

ArmSummary SummarizeArm(const ExperimentSpec& spec,
                        std::vector<RobotRun> runs) {
  ArmSummary a;
  const int steps = spec.steps;
  a.mean_velocity.assign(steps, 0.0);
  int onset = steps;
  for (const NoiseEvent& e : spec.events) onset = std::min(onset, e.onset_step);
  for (const RobotRun& r : runs) {
    for (int k = 0; k < steps; ++k) a.mean_velocity[k] += r.velocity[k];
  }
  for (Real& v : a.mean_velocity) v /= runs.size();

  auto window_mean = [&](int lo, int hi) {
    lo = std::max(lo, 0);
    hi = std::min(hi, steps);
    if (hi <= lo) return 0.0;
    Real s = 0.0;
    for (int k = lo; k < hi; ++k) s += a.mean_velocity[k];
    return s / (hi - lo);
  };
  a.pre_noise_velocity = window_mean(kPreNoiseStart, onset);
  a.post_noise_velocity = window_mean(kPostStart, kPostEnd);

  Real err = 0.0, over = 0.0;
  int err_n = 0;
  int op_ticks = 0, post_ticks = 0;
  a.max_switch_delay_ticks = 0;
  for (const RobotRun& r : runs) {
    for (int k = kPostStart; k < std::min(kPostEnd, steps); ++k) {
      err += std::abs(r.velocity[k] - spec.command);
      over += std::max(0.0, r.velocity[k] - spec.command);
      ++err_n;
    }
    if (r.terminated_step >= 0 && r.termination != "end_of_terrain") ++a.falls;
    int delay = -1;
    int count = 0;
    for (const TickTrace& t : r.ticks) {
      if (t.step < onset) continue;
      ++count;
      ++post_ticks;
      if (t.mode == Mode::kOp) {
        ++op_ticks;
        if (delay < 0) delay = count;
      }
    }
    if (onset < steps) {
      a.max_switch_delay_ticks =
          (delay < 0 || a.max_switch_delay_ticks < 0)
              ? -1
              : std::max(a.max_switch_delay_ticks, delay);
    }
  }
  a.tracking_error = err_n ? err / err_n : 0.0;
  a.overshoot = err_n ? over / err_n : 0.0;
  a.op_fraction_after_onset =
      post_ticks ? static_cast<Real>(op_ticks) / post_ticks : 0.0;
  a.runs = std::move(runs);
  return a;
}

std::vector<NoiseCondition> DefaultNoiseConditions() {
  return {{NoiseKind::kGaussian, 30},   {NoiseKind::kGaussian, 70},
          {NoiseKind::kGaussian, 100},  {NoiseKind::kSaltPepper, 10},
          {NoiseKind::kSaltPepper, 30}, {NoiseKind::kSaltPepper, 70}};
}

std::vector<ConditionResult> RunNoiseRobustness(
    const Agent& agent, const ExperimentSpec& base,
    const std::vector<NoiseCondition>& conditions, int onset) {
  std::vector<ConditionResult> out;
  for (const NoiseCondition& c : conditions) {
    ExperimentSpec spec = base;
    spec.events = {{c.kind, c.level, onset, -1}};
    spec.Validate();
    ConditionResult r{c, {}, {}};
    for (Arm arm : {Arm::kVpOnly, Arm::kRenet}) {
      std::vector<RobotRun> runs;
      for (int i = 0; i < spec.robots; ++i) {
        runs.push_back(RunRobot(agent, spec, arm, i));
      }
      ArmSummary s = SummarizeArm(spec, std::move(runs));
      (arm == Arm::kVpOnly ? r.vp_only : r.renet) = std::move(s);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void WriteVelocityCsv(std::ostream& os,
                      const std::vector<ConditionResult>& results) {
  os << "schema,condition,arm,step,mean_velocity\n";
  os << std::setprecision(10);
  for (const ConditionResult& r : results) {
    const std::string label = NoiseLabel(r.condition.kind, r.condition.level);
    for (Arm arm : {Arm::kVpOnly, Arm::kRenet}) {
      const ArmSummary& a = arm == Arm::kVpOnly ? r.vp_only : r.renet;
      for (size_t k = 0; k < a.mean_velocity.size(); ++k) {
        os << kHarnessSchemaVersion << ',' << label << ',' << ArmName(arm)
           << ',' << k << ',' << a.mean_velocity[k] << "\n";
      }
    }
  }
}

void WriteNoiseSummaryCsv(std::ostream& os,
                          const std::vector<ConditionResult>& results) {
  os << "schema,condition,arm,pre_noise_velocity,post_noise_velocity,"
        "tracking_error,overshoot,max_switch_delay_ticks,op_fraction_after_onset,falls\n";
  os << std::setprecision(10);
  for (const ConditionResult& r : results) {
    const std::string label = NoiseLabel(r.condition.kind, r.condition.level);
    for (Arm arm : {Arm::kVpOnly, Arm::kRenet}) {
      const ArmSummary& a = arm == Arm::kVpOnly ? r.vp_only : r.renet;
      os << kHarnessSchemaVersion << ',' << label << ',' << ArmName(arm) << ','
         << a.pre_noise_velocity << ',' << a.post_noise_velocity << ','
         << a.tracking_error << ',' << a.overshoot << ','
         << a.max_switch_delay_ticks << ','
         << a.op_fraction_after_onset << ',' << a.falls << "\n";
    }
  }
}

void WriteTraceJsonl(std::ostream& os, const RobotRun& run, Real beta) {
  for (const TickTrace& t : run.ticks) {
    nlohmann::json j;
    j["schema"] = kTraceSchemaVersion;
    j["kind"] = "tick";
    j["step"] = t.step;
    j["loss_ad"] = t.loss_ad;
    j["beta"] = beta;
    j["P"] = t.P;
    j["mode"] = ModeName(t.mode);
    j["switched"] = t.switched;
    os << j.dump() << "\n";
  }
  for (const StepTrace& s : run.steps) {
    nlohmann::json j;
    j["schema"] = kTraceSchemaVersion;
    j["kind"] = "step";
    j["step"] = s.step;
    j["x"] = s.x;
    j["z"] = s.z;
    j["vx"] = s.vx;
    j["reward"] = s.reward;
    os << j.dump() << "\n";
  }
}

ScriptedTimeline DefaultTimeline(std::uint64_t seed) {
  ScriptedTimeline t;
  t.ticks = 600;
  t.segments = {{NoiseKind::kSaltPepper, 70.0, 100, 160},
                {NoiseKind::kSaltPepper, 70.0, 300, 340},
                {NoiseKind::kSaltPepper, 70.0, 480, 540}};
  // Glitches stay out of the guard before each onset so every onset starts
  // from a filter that has settled near P = 1.
  constexpr int kGuard = 60;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution glitch(0.05);
  for (int k = 5; k < t.ticks; ++k) {
    bool blocked = false;
    for (const NoiseEvent& s : t.segments) {
      if (k >= s.onset_step - kGuard && k < s.end_step + 2) blocked = true;
    }
    if (!blocked && glitch(rng)) t.glitch_ticks.push_back(k);
  }
  return t;
}

LossRecording RecordTimeline(const Agent& agent, const ExperimentSpec& spec,
                             const ScriptedTimeline& timeline) {
  Command cmd;
  cmd.c_x = spec.command;
  cmd.zero_flag = spec.command == 0.0;
  Episode ep = StartEpisode(agent, spec.terrain, spec.level, cmd,
                            Mix(spec.seed, 77));
  std::mt19937_64 noise_rng(Mix(spec.seed, 78));
  const std::set<int> glitches(timeline.glitch_ticks.begin(),
                               timeline.glitch_ticks.end());
  const int tick_steps = agent.config().tick_steps;
  LossRecording rec;
  for (const NoiseEvent& s : timeline.segments) rec.onsets.push_back(s.onset_step);
  int tick = 0;
  for (int step = 0; tick < timeline.ticks; ++step) {
    if (step % tick_steps == 0) {
      std::optional<NoiseEvent> active;
      for (const NoiseEvent& s : timeline.segments) {
        if (s.Active(tick)) active = s;
      }
      if (!active && glitches.count(tick)) {
        active = NoiseEvent{NoiseKind::kSaltPepper, 70.0, tick, tick + 1};
      }
      FrameFilter filter;
      if (active) {
        const NoiseEvent e = *active;
        filter = [&noise_rng, e](const DepthImage& img) {
          return ApplyNoise(img, e, noise_rng);
        };
      }
      // Walk blind so the trajectory does not depend on the frames.
      ep.perception.Refresh(agent, ep.world, ep.rng, 1, filter);
      const Vec d = ep.perception.depth().Flatten();
      rec.losses.push_back(LossAd(d, agent.ae.Reconstruct(d)));
      ++tick;
    }
    const StepResult sr = ActAndStep(agent, ep, nullptr);
    if (sr.terminated) {
      // Restart in place; the pair stays warm because the buffer is kept.
      ep.world.Reset(Mix(spec.seed, 79 + step));
    }
  }
  return rec;
}

std::vector<SweepRow> SweepGamma(const LossRecording& rec, Real beta,
                                 const std::vector<Real>& gammas) {
  std::vector<SweepRow> rows;
  for (Real g : gammas) {
    SweepRow row;
    row.gamma = g;
    row.predicted_delay_ticks = PredictedFlipTicks(g);
    SelectorState s = MakeSelector(beta, g);
    std::vector<Mode> modes;
    // The first tick pairs a frame with zero padding and is skipped.
    for (size_t k = 0; k < rec.losses.size(); ++k) {
      if (k > 0) s = FilterUpdate(s, rec.losses[k], static_cast<int>(k));
      modes.push_back(s.mode);
    }
    row.switch_count = s.switch_count;
    Real delay_sum = 0.0;
    for (int onset : rec.onsets) {
      int delay = -1;
      for (size_t k = onset; k < modes.size(); ++k) {
        if (modes[k] == Mode::kOp) {
          delay = static_cast<int>(k) - onset + 1;
          break;
        }
      }
      Require(delay > 0, "mode never switched after a scripted onset");
      delay_sum += delay;
      row.max_delay_ticks = std::max(row.max_delay_ticks, delay);
    }
    row.mean_delay_ticks =
        rec.onsets.empty() ? 0.0 : delay_sum / rec.onsets.size();
    rows.push_back(row);
  }
  return rows;
}

std::vector<Real> DefaultGammas() { return {0.05, 0.1, 0.2, 0.3, 0.5, 1.0}; }

void WriteSweepCsv(std::ostream& os, const std::vector<SweepRow>& rows,
                   Real tick_seconds) {
  os << "schema,gamma,mean_delay_ticks,mean_delay_s,max_delay_ticks,"
        "predicted_delay_ticks,switch_count\n";
  os << std::setprecision(10);
  for (const SweepRow& r : rows) {
    os << kHarnessSchemaVersion << ',' << r.gamma << ',' << r.mean_delay_ticks
       << ',' << r.mean_delay_ticks * tick_seconds << ',' << r.max_delay_ticks
       << ',' << r.predicted_delay_ticks << ',' << r.switch_count << "\n";
  }
}

namespace {

// Runs clean VP-mode episodes and calls `on_pair` with the two newest frames
// at every warm tick of episodes that end without a fall or flip.
template <typename F>
std::pair<int, int> ForCleanPairs(const Agent& agent,
                                  const std::vector<TerrainKind>& terrains,
                                  int level, int episodes, int steps,
                                  std::uint64_t seed, F on_pair) {
  Require(!terrains.empty() && episodes >= 1 && steps >= 1,
          "clean episodes need terrains, episodes and steps");
  std::mt19937_64 cmd_rng(Mix(seed, 5));
  int successful = 0;
  for (int e = 0; e < episodes; ++e) {
    const Command cmd = SampleCommand(cmd_rng, 1);
    Episode ep = StartEpisode(agent, terrains[e % terrains.size()], level, cmd,
                              Mix(seed, 10 + e));
    std::vector<std::pair<DepthImage, DepthImage>> pairs;
    bool failed = false;
    for (int step = 0; step < steps; ++step) {
      if (ep.perception.TickDue(step)) {
        ep.perception.Refresh(agent, ep.world, ep.rng, 0);
        if (ep.perception.depth().warm()) {
          pairs.emplace_back(ep.perception.depth().frame(0),
                             ep.perception.depth().frame(1));
        }
      }
      const StepResult sr = ActAndStep(agent, ep, nullptr);
      if (sr.terminated) {
        failed = TerminationType(sr) != "end_of_terrain";
        break;
      }
    }
    if (failed) continue;
    ++successful;
    for (const auto& [newest, older] : pairs) on_pair(newest, older);
  }
  return {episodes, successful};
}

}  // namespace

CleanLossSample CollectCleanLosses(const Agent& agent,
                                   const std::vector<TerrainKind>& terrains,
                                   int level, int episodes, int steps,
                                   std::uint64_t seed) {
  CleanLossSample s;
  const auto [n, ok] = ForCleanPairs(
      agent, terrains, level, episodes, steps, seed,
      [&](const DepthImage& a, const DepthImage& b) {
        s.losses.push_back(PairLoss(agent, a, b));
      });
  s.episodes = n;
  s.successful = ok;
  return s;
}

SeparationReport MeasureSeparation(const Agent& agent, Real beta,
                                   const std::vector<TerrainKind>& terrains,
                                   int level, int episodes, int steps,
                                   std::uint64_t seed) {
  SeparationReport r;
  std::mt19937_64 noise_rng(Mix(seed, 6));
  std::vector<Real> clean, sp;
  int occ_above = 0;
  ForCleanPairs(agent, terrains, level, episodes, steps, seed,
                [&](const DepthImage& a, const DepthImage& b) {
                  clean.push_back(PairLoss(agent, a, b));
                  sp.push_back(PairLoss(agent,
                                        InjectSaltPepper(a, 70.0, noise_rng),
                                        InjectSaltPepper(b, 70.0, noise_rng)));
                  if (PairLoss(agent, FullOcclusion(a), FullOcclusion(b)) >=
                      beta) {
                    ++occ_above;
                  }
                });
  r.frames = static_cast<int>(clean.size());
  if (r.frames == 0) return r;
  const Real n = r.frames;
  r.clean_below =
      std::count_if(clean.begin(), clean.end(), [&](Real l) { return l < beta; }) / n;
  r.salt_pepper_above =
      std::count_if(sp.begin(), sp.end(), [&](Real l) { return l >= beta; }) / n;
  r.occlusion_above = occ_above / n;
  r.median_clean = Median(clean);
  r.median_salt_pepper = Median(sp);
  return r;
}

}  // namespace redest
