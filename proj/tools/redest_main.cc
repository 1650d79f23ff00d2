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

// redest: training, evaluation and diagnostics front-end.
//
// Exit codes: 0 success, 1 runtime or contract error (one JSON line on
// stderr), 2 usage error, 3 a check ran and failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "redest/error.h"
#include "redest/gradcheck.h"
#include "redest/harness.h"
#include "redest/loss_checks.h"
#include "redest/trainer.h"

namespace redest {
namespace {

namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
};

fs::path OutDir(const Common& c) {
  fs::path dir = c.out;
  if (dir.empty()) {
    const char* env = std::getenv("REDEST_OUT");
    dir = env != nullptr && *env != '\0' ? env : "redest_out";
  }
  fs::create_directories(dir);
  return dir;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream os(path);
  Require(os.good(), "cannot write '" + path.string() + "'");
  return os;
}

std::vector<TerrainKind> ParseTerrains(const std::string& list) {
  std::vector<TerrainKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(TerrainKindFromName(item));
  Require(!out.empty(), "terrain list is empty");
  return out;
}

// "GA30,SP70,OCC" -> conditions.
std::vector<NoiseCondition> ParseConditions(const std::string& list) {
  if (list.empty()) return DefaultNoiseConditions();
  std::vector<NoiseCondition> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "OCC") {
      out.push_back({NoiseKind::kOcclusion, 100});
      continue;
    }
    Require(item.size() > 2, "bad noise condition '" + item + "'");
    const std::string kind = item.substr(0, 2);
    const Real level = std::stod(item.substr(2));
    if (kind == "GA") {
      out.push_back({NoiseKind::kGaussian, level});
    } else if (kind == "SP") {
      out.push_back({NoiseKind::kSaltPepper, level});
    } else {
      throw ContractError("bad noise condition '" + item + "'");
    }
  }
  return out;
}

Agent LoadAgent(const std::string& path, Checkpoint* ckpt_out) {
  Require(fs::exists(path), "checkpoint '" + path + "' not found");
  Checkpoint ckpt = Checkpoint::Load(path);
  Agent agent = Agent::FromCheckpoint(ckpt);
  if (ckpt_out != nullptr) *ckpt_out = std::move(ckpt);
  return agent;
}

// Explicit value, then a calibration file, then the checkpoint's own entry.
Real ResolveBeta(std::optional<Real> beta, const std::string& beta_file,
                 const Checkpoint& ckpt) {
  if (beta) return *beta;
  if (!beta_file.empty()) {
    KeyValueConfig kv = KeyValueConfig::Load(beta_file);
    const Real b = kv.GetReal("beta", -1.0);
    Require(b >= 0.0, "'" + beta_file + "' holds no beta entry");
    return b;
  }
  if (const auto b = ckpt.Meta("beta")) return std::stod(*b);
  throw ContractError(
      "no threshold: pass --beta or --beta-file, or run calibrate-beta");
}

Real ResolveGamma(std::optional<Real> gamma, const Checkpoint& ckpt) {
  if (gamma) return *gamma;
  if (const auto g = ckpt.Meta("gamma")) return std::stod(*g);
  return 0.1;
}

struct EvalArgs {
  std::string checkpoint;
  std::optional<Real> beta;
  std::optional<Real> gamma;
  std::string beta_file;
  std::string terrain = "flat";
  int level = 0;
  int robots = 20;
  Real command = 0.6;
  int steps = 450;
};

void AddEvalArgs(CLI::App* app, EvalArgs& a) {
  app->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")
      ->required();
  app->add_option("--beta", a.beta, "Selector threshold");
  app->add_option("--beta-file", a.beta_file, "Output of calibrate-beta");
  app->add_option("--gamma", a.gamma, "Filter coefficient override");
  app->add_option("--terrain", a.terrain, "Terrain kind");
  app->add_option("--level", a.level, "Terrain level 0-9");
  app->add_option("--robots", a.robots, "Robots per arm");
  app->add_option("--command", a.command, "Forward command in m/s");
  app->add_option("--steps", a.steps, "Simulation steps per robot");
}

ExperimentSpec MakeSpec(const EvalArgs& a, const Checkpoint& ckpt,
                        std::uint64_t seed, const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  s.terrain = TerrainKindFromName(a.terrain);
  s.level = a.level;
  s.robots = a.robots;
  s.command = a.command;
  s.steps = a.steps;
  s.beta = ResolveBeta(a.beta, a.beta_file, ckpt);
  s.gamma = ResolveGamma(a.gamma, ckpt);
  s.seed = seed;
  return s;
}

int CmdTrain(const Common& c, std::optional<int> iterations) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : TrainConfig::Load(c.config);
  cfg.seed = c.seed;
  if (iterations) cfg.iterations = *iterations;
  const fs::path dir = OutDir(c);
  Trainer t(cfg);
  t.Train(dir.string());
  std::cout << "trained " << cfg.iterations << " iterations into "
            << dir.string() << "\n";
  return 0;
}

int CmdEvalNoise(const Common& c, const EvalArgs& a,
                 const std::string& conditions, int onset) {
  Checkpoint ckpt;
  const Agent agent = LoadAgent(a.checkpoint, &ckpt);
  const ExperimentSpec spec = MakeSpec(a, ckpt, c.seed, "eval-noise");
  const auto results =
      RunNoiseRobustness(agent, spec, ParseConditions(conditions), onset);
  const fs::path dir = OutDir(c);
  {
    std::ofstream os = OpenOut(dir / "noise_velocity.csv");
    WriteVelocityCsv(os, results);
  }
  {
    std::ofstream os = OpenOut(dir / "noise_summary.csv");
    WriteNoiseSummaryCsv(os, results);
  }
  fs::create_directories(dir / "traces");
  for (const ConditionResult& r : results) {
    const std::string label = NoiseLabel(r.condition.kind, r.condition.level);
    for (Arm arm : {Arm::kVpOnly, Arm::kRenet}) {
      const ArmSummary& s = arm == Arm::kVpOnly ? r.vp_only : r.renet;
      for (size_t i = 0; i < s.runs.size(); ++i) {
        std::ofstream os = OpenOut(dir / "traces" /
                                   (label + "_" + ArmName(arm) + "_robot" +
                                    std::to_string(i) + ".jsonl"));
        WriteTraceJsonl(os, s.runs[i], spec.beta);
      }
    }
  }
  WriteNoiseSummaryCsv(std::cout, results);
  return 0;
}

int CmdSweepGamma(const Common& c, const EvalArgs& a,
                  const std::vector<Real>& gammas) {
  Checkpoint ckpt;
  const Agent agent = LoadAgent(a.checkpoint, &ckpt);
  const ExperimentSpec spec = MakeSpec(a, ckpt, c.seed, "sweep-gamma");
  const LossRecording rec =
      RecordTimeline(agent, spec, DefaultTimeline(c.seed));
  const auto rows =
      SweepGamma(rec, spec.beta, gammas.empty() ? DefaultGammas() : gammas);
  const Real tick_seconds = agent.config().tick_steps * WorldParams{}.dt;
  const fs::path dir = OutDir(c);
  {
    std::ofstream os = OpenOut(dir / "gamma_sweep.csv");
    WriteSweepCsv(os, rows, tick_seconds);
  }
  {
    std::ofstream os = OpenOut(dir / "gamma_sweep_losses.csv");
    os << "schema,tick,loss_ad\n";
    for (size_t k = 0; k < rec.losses.size(); ++k) {
      os << kHarnessSchemaVersion << ',' << k << ',' << rec.losses[k] << "\n";
    }
  }
  WriteSweepCsv(std::cout, rows, tick_seconds);
  return 0;
}

int CmdTrace(const Common& c, const EvalArgs& a, const std::string& noise,
             Real level, int onset, int end, int robot, bool vp_only) {
  Checkpoint ckpt;
  const Agent agent = LoadAgent(a.checkpoint, &ckpt);
  ExperimentSpec spec = MakeSpec(a, ckpt, c.seed, "trace");
  const NoiseKind kind = NoiseKindFromName(noise);
  if (kind != NoiseKind::kNone) spec.events = {{kind, level, onset, end}};
  const Arm arm = vp_only ? Arm::kVpOnly : Arm::kRenet;
  const RobotRun run = RunRobot(agent, spec, arm, robot);
  const fs::path dir = OutDir(c);
  std::ofstream os = OpenOut(dir / "trace.jsonl");
  WriteTraceJsonl(os, run, spec.beta);
  int switches = 0, op_ticks = 0;
  for (const TickTrace& t : run.ticks) {
    switches += t.switched;
    op_ticks += t.mode == Mode::kOp;
  }
  nlohmann::json j;
  j["schema"] = kHarnessSchemaVersion;
  j["arm"] = ArmName(arm);
  j["ticks"] = run.ticks.size();
  j["steps"] = run.steps.size();
  j["switches"] = switches;
  j["op_ticks"] = op_ticks;
  j["terminated_step"] = run.terminated_step;
  j["termination"] = run.termination;
  std::cout << j.dump() << "\n";
  return 0;
}

int CmdRenderDepth(const Common& c, const std::string& terrain, int level,
                   int walk, const std::string& stage, const std::string& noise,
                   Real noise_level) {
  AgentConfig cfg;
  if (!c.config.empty()) cfg = TrainConfig::Load(c.config).agent;
  cfg.Harmonize();
  std::mt19937_64 rng(c.seed);
  Command cmd;
  cmd.c_x = 0.6;
  cmd.zero_flag = false;
  World world(GenerateTerrain(TerrainKindFromName(terrain), level, rng()), cmd,
              rng());
  for (int k = 0; k < walk; ++k) world.Step({0.3, 0.0});
  DepthImage img;
  if (stage == "raw") {
    img = Render(world, cfg.camera, rng, false);
  } else {
    img = CaptureFrame(world, cfg, rng);
  }
  const NoiseKind kind = NoiseKindFromName(noise);
  if (kind != NoiseKind::kNone) {
    img = ApplyNoise(img, {kind, noise_level, 0, -1}, rng);
  }
  const fs::path dir = OutDir(c);
  std::ofstream os = OpenOut(dir / "depth.txt");
  WriteDepthFrame(os, img);
  std::cout << "wrote " << img.height << "x" << img.width << " "
            << DepthStageName(img.stage) << " frame to "
            << (dir / "depth.txt").string() << "\n";
  return 0;
}

int CmdCalibrateBeta(const Common& c, const std::string& checkpoint,
                     int episodes, const std::string& terrains, int level,
                     int steps) {
  const Agent agent = LoadAgent(checkpoint, nullptr);
  const CleanLossSample s = CollectCleanLosses(
      agent, ParseTerrains(terrains), level, episodes, steps, c.seed);
  Require(!s.losses.empty(), "no successful clean episode to calibrate on");
  const BetaCalibration cal = CalibrateBeta(s.losses, s.successful, c.seed);
  const fs::path dir = OutDir(c);
  std::ofstream os = OpenOut(dir / "beta.txt");
  os << BetaConfigText(cal);
  std::cout << BetaConfigText(cal);
  return 0;
}

int CmdGradcheck(int instances, std::uint64_t seed) {
  auto results = RunLayerGradChecks(instances, seed);
  const auto losses = RunLossGradChecks(instances, seed);
  results.insert(results.end(), losses.begin(), losses.end());
  bool ok = true;
  for (const GradCheckResult& r : results) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " instances="
              << r.instances << " worst_rel_error=" << r.worst_error << "\n";
    ok = ok && r.passed();
  }
  return ok ? 0 : kExitCheckFailed;
}

int Main(int argc, char** argv) {
  CLI::App app{"redest: redundant-estimator locomotion toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--config", common.config, "Key-value config file");
    sub->add_option("--out", common.out,
                    "Output directory (default $REDEST_OUT or ./redest_out)");
  };

  CLI::App* train = app.add_subcommand("train", "Train an agent");
  add_common(train);
  std::optional<int> iterations;
  train->add_option("--iterations", iterations, "Override the iteration count");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval-noise", "Deployment noise robustness");
  add_common(eval);
  AddEvalArgs(eval, eval_args);
  std::string conditions;
  int onset = kNoiseOnsetStep;
  eval->add_option("--conditions", conditions,
                   "Comma list such as GA30,SP70,OCC (default: paper grid)");
  eval->add_option("--onset", onset, "Noise onset step");

  CLI::App* sweep = app.add_subcommand("sweep-gamma", "Filter coefficient sweep");
  add_common(sweep);
  AddEvalArgs(sweep, eval_args);
  std::vector<Real> gammas;
  sweep->add_option("--gammas", gammas, "Coefficients to sweep")->delimiter(',');

  CLI::App* trace = app.add_subcommand("trace", "Per-tick switching trace");
  add_common(trace);
  AddEvalArgs(trace, eval_args);
  std::string trace_noise = "none";
  Real trace_level = 100.0;
  int trace_onset = kNoiseOnsetStep, trace_end = -1, trace_robot = 0;
  bool trace_vp_only = false;
  trace->add_option("--noise", trace_noise,
                    "none, gaussian, salt_pepper or occlusion");
  trace->add_option("--noise-level", trace_level, "Noise level in percent");
  trace->add_option("--onset", trace_onset, "Noise onset step");
  trace->add_option("--end", trace_end, "Noise end step (-1: never)");
  trace->add_option("--robot", trace_robot, "Robot index");
  trace->add_flag("--vp-only", trace_vp_only, "Pin the vision estimator");

  CLI::App* render = app.add_subcommand("render-depth", "Render one depth frame");
  add_common(render);
  std::string render_terrain = "flat", render_stage = "randomized",
              render_noise = "none";
  int render_level = 0, render_walk = 0;
  Real render_noise_level = 30.0;
  render->add_option("--terrain", render_terrain, "Terrain kind");
  render->add_option("--level", render_level, "Terrain level 0-9");
  render->add_option("--walk", render_walk, "Steps to walk before rendering");
  render->add_option("--stage", render_stage, "raw or randomized")
      ->check(CLI::IsMember({"raw", "randomized"}));
  render->add_option("--noise", render_noise, "Deployment noise kind");
  render->add_option("--noise-level", render_noise_level, "Noise level");

  CLI::App* calib = app.add_subcommand("calibrate-beta",
                                       "Threshold from clean episodes");
  add_common(calib);
  std::string calib_ckpt, calib_terrains = "flat,stairs_up,gap";
  int calib_episodes = 20, calib_level = 0, calib_steps = 400;
  calib->add_option("--checkpoint", calib_ckpt, "Trained checkpoint")->required();
  calib->add_option("--episodes", calib_episodes, "Clean episodes");
  calib->add_option("--terrains", calib_terrains, "Comma list of terrains");
  calib->add_option("--level", calib_level, "Terrain level 0-9");
  calib->add_option("--steps", calib_steps, "Steps per episode");

  CLI::App* grad = app.add_subcommand("gradcheck",
                                      "Finite-difference gradient suite");
  add_common(grad);
  int grad_instances = 20;
  grad->add_option("--instances", grad_instances, "Instances per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return CmdTrain(common, iterations);
    if (*eval) return CmdEvalNoise(common, eval_args, conditions, onset);
    if (*sweep) return CmdSweepGamma(common, eval_args, gammas);
    if (*trace) {
      return CmdTrace(common, eval_args, trace_noise, trace_level, trace_onset,
                      trace_end, trace_robot, trace_vp_only);
    }
    if (*render) {
      return CmdRenderDepth(common, render_terrain, render_level, render_walk,
                            render_stage, render_noise, render_noise_level);
    }
    if (*calib) {
      return CmdCalibrateBeta(common, calib_ckpt, calib_episodes,
                              calib_terrains, calib_level, calib_steps);
    }
    if (*grad) return CmdGradcheck(grad_instances, common.seed);
  } catch (const ContractError& e) {
    std::cerr << nlohmann::json{{"error", "contract"}, {"message", e.what()}}.dump()
              << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "runtime"}, {"message", e.what()}}.dump()
              << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace redest

int main(int argc, char** argv) { return redest::Main(argc, argv); }
