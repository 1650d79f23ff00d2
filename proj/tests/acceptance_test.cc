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

// End-to-end acceptance suite. Each criterion prints one PASS or FAIL line;
// the exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "redest/agent.h"
#include "redest/checkpoint.h"
#include "redest/depth.h"
#include "redest/estimators.h"
#include "redest/gradcheck.h"
#include "redest/harness.h"
#include "redest/loss_checks.h"
#include "redest/policy.h"
#include "redest/selector.h"
#include "redest/terrain.h"
#include "redest/trainer.h"
#include "redest/world.h"

namespace fs = std::filesystem;

namespace redest {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::uint64_t Bits(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof u);
  return u;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path WorkDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "redest_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Rows of a CSV file keyed by header name.
std::vector<std::map<std::string, std::string>> ReadCsv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < header.size() && i < cells.size(); ++i) {
      row[header[i]] = cells[i];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string Fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity.

Outcome GradientFidelity() {
  const auto start = Clock::now();
  auto results = RunLayerGradChecks(20, 1);
  const auto losses = RunLossGradChecks(20, 2);
  results.insert(results.end(), losses.begin(), losses.end());
  const double secs = Seconds(start);
  bool ok = secs < 60.0 && !results.empty();
  double worst = 0.0;
  std::string failed;
  for (const auto& r : results) {
    worst = std::max(worst, r.worst_error);
    if (!r.passed() || r.instances < 20) {
      ok = false;
      failed += " " + r.name;
    }
  }
  std::string detail = std::to_string(results.size()) + " checks, worst " +
                       Fmt(worst) + ", " + Fmt(secs, 3) + " s";
  if (!failed.empty()) detail += ", failed:" + failed;
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 2. Filter recurrence.

struct OracleStep {
  double P;
  bool vp;
};

// Written out from the filter definition, independent of the library.
std::vector<OracleStep> FilterOracle(double gamma,
                                     const std::vector<double>& p_hat) {
  std::vector<OracleStep> out;
  double p = 1.0;
  for (double h : p_hat) {
    p = (1.0 - gamma) * p + gamma * h;
    out.push_back({p, p > 0.5});
  }
  return out;
}

Outcome FilterOracleMatch() {
  const double beta = 0.5;
  const int n = 60;
  std::map<std::string, std::vector<double>> inputs;
  std::vector<double> step(n, 0.0), impulse(n, 1.0), alternating(n);
  impulse[3] = 0.0;
  for (int i = 0; i < n; ++i) alternating[i] = i % 2 == 0 ? 0.0 : 1.0;
  inputs["step"] = step;
  inputs["impulse"] = impulse;
  inputs["alternating"] = alternating;
  bool ok = true;
  double worst = 0.0;
  int flip_at = -1;
  for (double gamma : {0.05, 0.1, 0.3, 1.0}) {
    for (const auto& [name, p_hat] : inputs) {
      const auto oracle = FilterOracle(gamma, p_hat);
      SelectorState s = MakeSelector(beta, gamma);
      for (int t = 0; t < n; ++t) {
        // A loss below beta reads as clean (P_hat = 1).
        const double loss = p_hat[t] == 1.0 ? 0.25 : 0.75;
        s = FilterUpdate(s, loss, t);
        worst = std::max(worst, std::abs(s.P - oracle[t].P));
        const bool vp = s.mode == Mode::kVp;
        if (vp != oracle[t].vp || std::abs(s.P - oracle[t].P) > 1e-12) {
          ok = false;
        }
        if (gamma == 0.1 && name == "step" && flip_at < 0 && !vp) {
          flip_at = t + 1;
        }
      }
    }
  }
  ok = ok && flip_at == 7 && PredictedFlipTicks(0.1) == 7;
  return {ok, "worst |dP| " + Fmt(worst) + ", gamma 0.1 step flip at tick " +
                  std::to_string(flip_at)};
}

// ---------------------------------------------------------------------------
// 3. Tracking reward.

double TrackingOracle(double c_x, double v_dot_n, double v_norm) {
  if (c_x == 0.0) return 1.0 / (1.0 + v_norm);
  return std::min(v_dot_n, c_x) / (c_x + 0.00001);
}

Outcome TrackingRewardOracle() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cmd(-1.0, 1.0), vel(-1.5, 1.5),
      speed(0.0, 2.0);
  double worst = 0.0;
  int zero_commands = 0;
  for (int i = 0; i < 1000; ++i) {
    const double c = i % 10 == 0 ? 0.0 : cmd(rng);
    const double dot = vel(rng);
    const double norm = std::max(std::abs(dot), speed(rng));
    zero_commands += c == 0.0;
    worst = std::max(worst, std::abs(LinVelReward(c, dot, norm) -
                                     TrackingOracle(c, dot, norm)));
  }
  const bool boundaries =
      LinVelReward(0.0, 0.0, 0.0) == 1.0 && LinVelReward(0.0, 1.0, 1.0) == 0.5;
  const bool ok = worst <= 1e-12 && boundaries && zero_commands > 0;
  return {ok, "1000 points (" + std::to_string(zero_commands) +
                  " with c_x = 0), worst " + Fmt(worst) + ", boundaries " +
                  (boundaries ? "exact" : "wrong")};
}

// ---------------------------------------------------------------------------
// 4. Raycast.

Heightfield StepField(double xs, double hs) {
  Heightfield f = GenerateTerrain(TerrainKind::kFlat, 0, 1);
  for (int i = 0; i < f.num_cells(); ++i) {
    if (f.CellStart(i) >= xs - 1e-9) f.heights[i] = hs;
  }
  return f;
}

// Ground hit before the face, face hit, or top hit, along the 3D ray.
double StepRange(double cx, double cz, double elev, double yaw, double xs,
                 double hs, double max_range) {
  const double a = std::cos(elev) * std::cos(yaw), b = std::sin(elev);
  double t = max_range;
  if (b < 0.0) {
    const double tg = cz / -b;
    if (cx + a * tg < xs) return std::min(tg, max_range);
  }
  const double tf = (xs - cx) / a;
  if (tf >= 0.0 && cz + b * tf < hs) return std::min(tf, max_range);
  if (b < 0.0) t = std::min(t, (cz - hs) / -b);
  return t;
}

bool InRange(const DepthImage& img, double max_range) {
  return std::all_of(img.data.begin(), img.data.end(),
                     [&](double d) { return d > 0.0 && d <= max_range; });
}

Outcome RaycastOracle() {
  CameraModel cam;
  double worst = 0.0;
  int pixels = 0;
  // hs = 0 is the flat field.
  for (double hs : {0.0, 0.1, 0.25, 0.5, -0.15}) {
    const double xs = 0.6;
    const Heightfield f = StepField(xs, hs);
    for (double pitch : {-0.3, -0.55, -0.9}) {
      const CameraPose pose{0.02, 0.33, pitch, -0.04};
      const DepthImage img = RenderAtPose(f, cam, pose);
      for (int r = 0; r < cam.height; ++r) {
        const double elev =
            pitch + cam.fov_v * (0.5 - (r + 0.5) / cam.height);
        for (int c = 0; c < cam.width; ++c) {
          const double yaw =
              pose.yaw + cam.fov_h * ((c + 0.5) / cam.width - 0.5);
          const double expect =
              StepRange(pose.x, pose.z, elev, yaw, xs, hs, cam.max_range);
          worst = std::max(worst, std::abs(img.at(r, c) - expect));
          ++pixels;
        }
      }
    }
  }
  // Every stage on a real scene, including deployment noise.
  bool ranged = true;
  std::mt19937_64 rng(4);
  for (TerrainKind kind : {TerrainKind::kFlat, TerrainKind::kStairsUp,
                           TerrainKind::kStairsDown, TerrainKind::kGap,
                           TerrainKind::kPlatform, TerrainKind::kRough}) {
    World world(GenerateTerrain(kind, 5, 7), Command{0.5, 0.0, false}, 7);
    for (int k = 0; k < 40; ++k) {
      if (world.Step({0.5, 0.0}).terminated) break;
      const DepthImage raw = Render(world, cam, rng, false);
      const DepthImage rnd = Render(world, cam, rng, true);
      const DepthImage cut = EdgeTruncateResize(rnd, 1);
      ranged = ranged && InRange(raw, cam.max_range) &&
               InRange(rnd, cam.max_range) && InRange(cut, cam.max_range);
      for (double level : {30.0, 70.0, 100.0}) {
        ranged = ranged && InRange(InjectGaussian(cut, level, rng), 2.0) &&
                 InRange(InjectSaltPepper(cut, level, rng), 2.0);
      }
      ranged = ranged && InRange(FullOcclusion(cut), 2.0) &&
               InRange(ApplyDeadZone(cut), 2.0);
    }
  }
  const bool ok = worst <= 1e-6 && ranged;
  return {ok, std::to_string(pixels) + " pixels, worst " + Fmt(worst) +
                  " m, stages " + (ranged ? "in (0, 2]" : "out of range")};
}

// ---------------------------------------------------------------------------
// 5. Latent exclusivity.

Outcome LatentExclusivity() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  const int half = 32;
  bool exclusive = true;
  for (int trial = 0; trial < 2000; ++trial) {
    Vec hb(half), hv(half);
    for (auto& v : hb) v = n(rng);
    for (auto& v : hv) v = n(rng);
    const int mask = trial % 2;
    const Vec z = FuseLatent(hb, hv, mask);
    if (static_cast<int>(z.size()) != 2 * half) exclusive = false;
    for (int i = 0; i < half; ++i) {
      const double on_b = mask == 1 ? hb[i] : 0.0;
      const double on_v = mask == 1 ? 0.0 : hv[i];
      if (Bits(z[i]) != Bits(on_b) || Bits(z[half + i]) != Bits(on_v)) {
        exclusive = false;
      }
    }
  }

  // Mode switches through the selector feeding the policy.
  AgentConfig cfg;
  cfg.Harmonize();
  const Agent agent(cfg, 5);
  const int width = cfg.policy.actor_input();
  SelectorState s = MakeSelector(0.5, 1.0);
  bool stable = true;
  Vec obs(cfg.estimator.obs_dim);
  for (int k = 0; k < 10000; ++k) {
    s = FilterUpdate(s, k % 2 == 0 ? 0.9 : 0.1, k);
    Vec hb(cfg.estimator.latent), hv(cfg.estimator.latent);
    for (auto& v : hb) v = n(rng);
    for (auto& v : hv) v = n(rng);
    for (auto& v : obs) v = n(rng);
    const Vec in = ActorInput(obs, SelectLatent(s, hb, hv));
    if (static_cast<int>(in.size()) != width) stable = false;
    const Vec mean = agent.ac.Mean(in);
    for (double v : in) stable = stable && std::isfinite(v);
    for (double v : mean) stable = stable && std::isfinite(v);
  }
  const bool switched = s.switch_count == 10000;
  const bool ok = exclusive && stable && switched;
  return {ok, std::string("exclusivity ") + (exclusive ? "held" : "broken") +
                  ", " + std::to_string(s.switch_count) +
                  " switches, width " + std::to_string(width) +
                  (stable ? " constant, finite" : " unstable")};
}

// ---------------------------------------------------------------------------
// 6 and 7 share one jointly trained checkpoint.

const std::vector<TerrainKind> kMix{TerrainKind::kFlat, TerrainKind::kStairsUp,
                                    TerrainKind::kGap};

struct TrainedMix {
  std::optional<Agent> agent;
  double train_seconds = 0.0;
  std::string error;
};

TrainedMix& Mix() {
  static TrainedMix mix = [] {
    TrainedMix m;
    try {
      const auto start = Clock::now();
      TrainConfig cfg =
          TrainConfig::Load(std::string(REDEST_CONFIG_DIR) + "/mix.cfg");
      Trainer trainer(cfg);
      trainer.Train(WorkDir("mix").string());
      m.train_seconds = Seconds(start);
      m.agent.emplace(trainer.agent());
    } catch (const std::exception& e) {
      m.error = e.what();
    }
    return m;
  }();
  return mix;
}

struct Calibrated {
  double beta = 0.0;
  double seconds = 0.0;
};

Calibrated& Beta() {
  static Calibrated cal = [] {
    Calibrated c;
    const auto start = Clock::now();
    const auto clean = CollectCleanLosses(*Mix().agent, kMix, 0, 30, 400, 11);
    c.beta = CalibrateBeta(clean.losses);
    c.seconds = Seconds(start);
    return c;
  }();
  return cal;
}

Outcome SelectorSeparation() {
  TrainedMix& mix = Mix();
  if (!mix.agent) return {false, "training failed: " + mix.error};
  const double beta = Beta().beta;
  const auto start = Clock::now();
  const SeparationReport r =
      MeasureSeparation(*mix.agent, beta, kMix, 0, 30, 400, 12);
  const double total = mix.train_seconds + Beta().seconds + Seconds(start);
  const bool ok = r.clean_below >= 0.95 && r.salt_pepper_above >= 0.95 &&
                  r.occlusion_above == 1.0 && total <= 30 * 60;
  return {ok, "beta " + Fmt(beta) + ", " + std::to_string(r.frames) +
                  " held-out pairs, clean below " + Fmt(r.clean_below) +
                  ", SP70 above " + Fmt(r.salt_pepper_above) +
                  ", occlusion above " + Fmt(r.occlusion_above) + ", " +
                  Fmt(total / 60.0, 3) + " min"};
}

Outcome NoiseProtocol() {
  TrainedMix& mix = Mix();
  if (!mix.agent) return {false, "training failed: " + mix.error};
  ExperimentSpec spec;
  spec.robots = 20;
  spec.command = 0.6;
  spec.beta = Beta().beta;
  const auto results = RunNoiseRobustness(*mix.agent, spec,
                                          DefaultNoiseConditions(), 150);
  bool ok = results.size() == 6;
  std::string detail;
  for (const auto& c : results) {
    const ArmSummary& r = c.renet;
    const bool delay =
        r.max_switch_delay_ticks >= 1 && r.max_switch_delay_ticks <= 15;
    const bool speed = r.post_noise_velocity >= 0.8 * r.pre_noise_velocity;
    const bool worse = c.vp_only.tracking_error > r.tracking_error;
    ok = ok && delay && speed && worse;
    detail += " " + NoiseLabel(c.condition.kind, c.condition.level) + "[" +
              (delay ? "" : "delay ") + (speed ? "" : "speed ") +
              (worse ? "" : "error ") + "d=" +
              std::to_string(r.max_switch_delay_ticks) + " v=" +
              Fmt(r.post_noise_velocity / r.pre_noise_velocity, 3) + " e=" +
              Fmt(c.vp_only.tracking_error, 3) + "/" +
              Fmt(r.tracking_error, 3) + "]";
  }
  return {ok, "per condition delay, post/pre, vp/renet error:" + detail};
}

// ---------------------------------------------------------------------------
// 8. Gamma sweep.

Outcome GammaSweep() {
  TrainedMix& mix = Mix();
  if (!mix.agent) return {false, "training failed: " + mix.error};
  ExperimentSpec spec;
  spec.beta = Beta().beta;
  const LossRecording rec =
      RecordTimeline(*mix.agent, spec, DefaultTimeline(3));
  const auto rows = SweepGamma(rec, spec.beta, DefaultGammas());
  int count_01 = -1, count_1 = -1;
  bool exact = true, monotone = true;
  std::string detail;
  for (size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    if (r.gamma == 0.1) count_01 = r.switch_count;
    if (r.gamma == 1.0) count_1 = r.switch_count;
    exact = exact && r.max_delay_ticks == r.predicted_delay_ticks &&
            r.mean_delay_ticks == r.predicted_delay_ticks &&
            r.predicted_delay_ticks == PredictedFlipTicks(r.gamma);
    if (i > 0) monotone = monotone && r.max_delay_ticks <= rows[i - 1].max_delay_ticks;
    detail += " " + Fmt(r.gamma, 3) + ":" + std::to_string(r.max_delay_ticks) +
              "/" + std::to_string(r.switch_count);
  }
  const bool ok = count_01 >= 0 && count_1 >= 0 && count_01 < count_1 &&
                  exact && monotone;
  return {ok, "gamma:delay/switches" + detail};
}

// ---------------------------------------------------------------------------
// 9. Adaptation schedule.

Outcome ScheduleAudit() {
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.num_envs = 8;
  cfg.horizon = 16;
  cfg.iterations = 100;
  cfg.episode_steps = 120;
  cfg.terrains = {TerrainKind::kFlat, TerrainKind::kGap,
                  TerrainKind::kStairsUp, TerrainKind::kPlatform,
                  TerrainKind::kRough, TerrainKind::kStairsDown};
  const fs::path dir = WorkDir("schedule");
  Trainer(cfg).Train(dir.string());
  const auto rows = ReadCsv(dir / "masks.csv");
  // mask[env][iteration]
  std::map<int, std::map<int, int>> masks;
  std::map<int, std::string> terrain;
  for (const auto& row : rows) {
    const int env = std::stoi(row.at("env"));
    masks[env][std::stoi(row.at("iteration"))] = std::stoi(row.at("mask"));
    terrain[env] = row.at("terrain");
  }
  int violations = 0;
  if (static_cast<int>(rows.size()) != cfg.num_envs * cfg.iterations) {
    ++violations;
  }
  for (const auto& [env, by_it] : masks) {
    const bool difficult = terrain[env] == "gap" || terrain[env] == "platform";
    for (const auto& [it, mask] : by_it) {
      if (difficult) {
        violations += mask != 0;
        continue;
      }
      const int block_start = it - it % cfg.flip_period;
      if (it != block_start) {
        violations += mask != by_it.at(block_start);
      } else if (it > 0) {
        violations += mask == by_it.at(it - 1);
      }
    }
  }
  const bool ok = violations == 0 && !rows.empty();
  return {ok, std::to_string(rows.size()) + " logged masks, " +
                  std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------------------
// 10. Determinism and persistence.

Outcome Determinism() {
  TrainConfig cfg;
  cfg.seed = 10;
  cfg.num_envs = 6;
  cfg.horizon = 24;
  cfg.iterations = 6;
  cfg.episode_steps = 150;
  cfg.checkpoint_every = 3;
  cfg.terrains = {TerrainKind::kFlat, TerrainKind::kGap};
  const fs::path a = WorkDir("det_a"), b = WorkDir("det_b");
  Trainer ta(cfg);
  ta.Train(a.string());
  Trainer(cfg).Train(b.string());
  bool same_files = true;
  int files = 0;
  for (const char* name : {"metrics.csv", "masks.csv", "checkpoint_3.ckpt",
                           "checkpoint_6.ckpt", "checkpoint.ckpt"}) {
    const std::string fa = ReadFile(a / name);
    same_files = same_files && !fa.empty() && fa == ReadFile(b / name);
    ++files;
  }

  const std::string bytes = ReadFile(a / "checkpoint.ckpt");
  std::stringstream in(bytes);
  const Checkpoint loaded = Checkpoint::Read(in);
  std::ostringstream again;
  loaded.Write(again);
  const Agent restored = Agent::FromCheckpoint(loaded);
  // The agent owns the networks; run meta comes from the trainer.
  Checkpoint resaved;
  restored.Save(resaved);
  for (const auto& [key, value] : loaded.meta()) resaved.SetMeta(key, value);
  std::ostringstream thrice;
  resaved.Write(thrice);
  const bool round_trip = again.str() == bytes && thrice.str() == bytes;

  ExperimentSpec spec;
  spec.robots = 2;
  spec.steps = 200;
  spec.beta = 0.05;
  spec.events = {{NoiseKind::kSaltPepper, 70.0, 80, -1}};
  bool same_eval = true;
  for (Arm arm : {Arm::kVpOnly, Arm::kRenet}) {
    for (int robot = 0; robot < spec.robots; ++robot) {
      std::ostringstream x, y;
      WriteTraceJsonl(x, RunRobot(ta.agent(), spec, arm, robot), spec.beta);
      WriteTraceJsonl(y, RunRobot(restored, spec, arm, robot), spec.beta);
      same_eval = same_eval && x.str() == y.str();
    }
  }
  const bool ok = same_files && round_trip && same_eval;
  return {ok, std::to_string(files) + " artifacts " +
                  (same_files ? "byte-identical" : "differ") +
                  ", round trip " + (round_trip ? "bit-exact" : "differs") +
                  ", restored evaluation " + (same_eval ? "identical" : "differs")};
}

// ---------------------------------------------------------------------------
// 11. Learning smoke.

Outcome LearningSmoke() {
  const auto start = Clock::now();
  TrainConfig cfg =
      TrainConfig::Load(std::string(REDEST_CONFIG_DIR) + "/tiny.cfg");
  const fs::path dir = WorkDir("smoke");
  Trainer(cfg).Train(dir.string());
  const double secs = Seconds(start);
  const auto rows = ReadCsv(dir / "metrics.csv");
  if (rows.size() < 15) return {false, "too few iterations logged"};
  auto mean = [&](const std::string& col, size_t from, size_t to) {
    double s = 0.0;
    for (size_t i = from; i < to; ++i) s += std::stod(rows[i].at(col));
    return s / static_cast<double>(to - from);
  };
  const size_t n = rows.size();
  const double lin_vel = mean("mean_lin_vel", n - 10, n);
  bool ok = lin_vel > 0.5 && secs <= 600.0;
  std::string detail = "r_lin_vel " + Fmt(lin_vel, 3);
  for (const char* col : {"loss_op", "loss_vp", "loss_ad"}) {
    const double first = mean(col, 0, 5), last = mean(col, n - 10, n);
    ok = ok && last < 0.25 * first;
    detail += std::string(", ") + col + " " + Fmt(first, 3) + " -> " +
              Fmt(last, 3);
  }
  detail += ", " + Fmt(secs, 3) + " s";
  return {ok, detail};
}

}  // namespace
}  // namespace redest

// Optional arguments select criteria by number; none runs them all.
int main(int argc, char** argv) {
  using redest::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient fidelity", redest::GradientFidelity},
      {"2 filter recurrence oracle", redest::FilterOracleMatch},
      {"3 tracking reward oracle", redest::TrackingRewardOracle},
      {"4 raycast oracle", redest::RaycastOracle},
      {"5 latent exclusivity", redest::LatentExclusivity},
      {"6 selector separation", redest::SelectorSeparation},
      {"7 noise robustness protocol", redest::NoiseProtocol},
      {"8 gamma sweep", redest::GammaSweep},
      {"9 adaptation schedule audit", redest::ScheduleAudit},
      {"10 determinism and persistence", redest::Determinism},
      {"11 learning smoke", redest::LearningSmoke},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failures = 0, ran = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto& [name, run] = criteria[i];
    ++ran;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
              << std::endl;
  }
  std::cout << (ran - failures) << "/" << ran
            << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
