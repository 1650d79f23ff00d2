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

#include "redest/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "redest/error.h"
#include "redest/optim.h"

namespace redest {
namespace {

std::uint64_t Mix(std::uint64_t seed, std::uint64_t k) {
  // splitmix64 over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string Str(Real v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string JoinInts(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> ParseInts(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const std::string& s : items) out.push_back(std::stoi(s));
  return out;
}

bool AllFinite(std::span<const Real> v) {
  for (Real x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string DumpVec(const char* name, std::span<const Real> v) {
  std::ostringstream os;
  os << name << " [";
  for (size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  os << "]\n";
  return os.str();
}

void ScaleOutputGrad(OutputGrad& g, Real s) {
  for (Vec* v : {&g.h, &g.v_hat, &g.z_o, &g.h_f_hat, &g.m_t_hat}) {
    for (Real& x : *v) x *= s;
  }
}

AdamConfig WithLr(Real lr) {
  AdamConfig c;
  c.lr = lr;
  return c;
}

}  // namespace

TrainConfig TrainConfig::FromKeyValue(KeyValueConfig kv) {
  TrainConfig c;
  c.seed = kv.GetU64("seed", c.seed);
  c.num_envs = kv.GetInt("num_envs", c.num_envs);
  c.horizon = kv.GetInt("horizon", c.horizon);
  c.iterations = kv.GetInt("iterations", c.iterations);
  c.episode_steps = kv.GetInt("episode_steps", c.episode_steps);
  std::vector<std::string> names;
  for (TerrainKind k : c.terrains) names.push_back(TerrainKindName(k));
  c.terrains.clear();
  for (const std::string& n : kv.GetList("terrains", names)) {
    c.terrains.push_back(TerrainKindFromName(n));
  }
  c.start_level = kv.GetInt("start_level", c.start_level);
  c.flip_period = kv.GetInt("flip_period", c.flip_period);

  EstimatorConfig& e = c.agent.estimator;
  e.depth_height = kv.GetInt("depth_height", e.depth_height);
  e.depth_width = kv.GetInt("depth_width", e.depth_width);
  e.history = kv.GetInt("history", e.history);
  e.depth_frames = kv.GetInt("depth_frames", e.depth_frames);
  e.variant = EncoderVariantFromName(
      kv.GetString("encoder", EncoderVariantName(e.variant)));
  AutoencoderConfig& ae = c.agent.autoencoder;
  std::vector<std::string> ch;
  for (int v : ae.channels) ch.push_back(std::to_string(v));
  ae.channels = ParseInts(kv.GetList("ae_channels", ch));
  ae.bottleneck = kv.GetInt("ae_bottleneck", ae.bottleneck);
  c.agent.edge_border = kv.GetInt("edge_border", c.agent.edge_border);
  c.agent.tick_steps = kv.GetInt("tick_steps", c.agent.tick_steps);
  c.agent.policy.init_log_std =
      kv.GetReal("init_log_std", c.agent.policy.init_log_std);

  PpoConfig& p = c.ppo;
  p.clip = kv.GetReal("ppo_clip", p.clip);
  p.epochs = kv.GetInt("ppo_epochs", p.epochs);
  p.minibatches = kv.GetInt("ppo_minibatches", p.minibatches);
  p.discount = kv.GetReal("discount", p.discount);
  p.gae_lambda = kv.GetReal("gae_lambda", p.gae_lambda);
  p.entropy_coef = kv.GetReal("entropy_coef", p.entropy_coef);
  p.max_grad_norm = kv.GetReal("max_grad_norm", p.max_grad_norm);
  p.actor_adam.lr = kv.GetReal("actor_lr", p.actor_adam.lr);
  p.critic_adam.lr = kv.GetReal("critic_lr", p.critic_adam.lr);

  RewardScales& r = c.rewards;
  r.lin_vel = kv.GetReal("reward.lin_vel", r.lin_vel);
  r.ang_vel = kv.GetReal("reward.ang_vel", r.ang_vel);
  r.collision = kv.GetReal("reward.collision", r.collision);
  r.joint_energy = kv.GetReal("reward.joint_energy", r.joint_energy);
  r.action_rate = kv.GetReal("reward.action_rate", r.action_rate);
  r.default_pos = kv.GetReal("reward.default_pos", r.default_pos);
  r.hip_pos = kv.GetReal("reward.hip_pos", r.hip_pos);
  r.joint_acc = kv.GetReal("reward.joint_acc", r.joint_acc);
  r.orientation = kv.GetReal("reward.orientation", r.orientation);

  CommandRanges& cr = c.commands;
  cr.phase1_min = kv.GetReal("cmd_phase1_min", cr.phase1_min);
  cr.phase2_min = kv.GetReal("cmd_phase2_min", cr.phase2_min);
  cr.max = kv.GetReal("cmd_max", cr.max);
  cr.yaw_range = kv.GetReal("cmd_yaw_range", cr.yaw_range);
  cr.p_zero = kv.GetReal("cmd_p_zero", cr.p_zero);
  c.curriculum.promote_ratio =
      kv.GetReal("curriculum_promote", c.curriculum.promote_ratio);
  c.curriculum.demote_ratio =
      kv.GetReal("curriculum_demote", c.curriculum.demote_ratio);

  c.estimator_lr = kv.GetReal("estimator_lr", c.estimator_lr);
  c.autoencoder_lr = kv.GetReal("autoencoder_lr", c.autoencoder_lr);
  c.supervised_max_grad_norm =
      kv.GetReal("supervised_max_grad_norm", c.supervised_max_grad_norm);
  c.autoencoder_pairs = kv.GetInt("autoencoder_pairs", c.autoencoder_pairs);
  c.phase_threshold = kv.GetReal("phase_threshold", c.phase_threshold);
  c.phase_window = kv.GetInt("phase_window", c.phase_window);
  c.phase_budget = kv.GetReal("phase_budget", c.phase_budget);
  c.checkpoint_every = kv.GetInt("checkpoint_every", c.checkpoint_every);
  c.selector_gamma = kv.GetReal("selector_gamma", c.selector_gamma);
  c.beta_override = kv.GetReal("beta_override", c.beta_override);

  const auto unknown = kv.Unconsumed();
  if (!unknown.empty()) {
    throw ContractError("unknown config key '" + unknown.front() + "'");
  }
  Require(c.num_envs >= 1 && c.horizon >= 1 && c.iterations >= 0,
          "num_envs and horizon must be positive");
  Require(c.episode_steps >= 1, "episode_steps must be positive");
  Require(!c.terrains.empty(), "terrains must name at least one kind");
  Require(c.start_level >= 0 && c.start_level < kNumLevels,
          "start_level out of range");
  Require(c.flip_period >= 1, "flip_period must be positive");
  Require(c.phase_window >= 1, "phase_window must be positive");
  Require(c.autoencoder_pairs >= 1, "autoencoder_pairs must be positive");
  Require(c.selector_gamma > 0.0 && c.selector_gamma <= 1.0,
          "selector_gamma must be in (0, 1]");
  c.agent.Harmonize();
  return c;
}

TrainConfig TrainConfig::Load(const std::string& path) {
  return FromKeyValue(KeyValueConfig::Load(path));
}

std::string TrainConfig::ToText() const {
  KeyValueConfig kv;
  kv.Set("seed", std::to_string(seed));
  kv.Set("num_envs", std::to_string(num_envs));
  kv.Set("horizon", std::to_string(horizon));
  kv.Set("iterations", std::to_string(iterations));
  kv.Set("episode_steps", std::to_string(episode_steps));
  std::string t;
  for (size_t i = 0; i < terrains.size(); ++i) {
    t += (i ? "," : "") + std::string(TerrainKindName(terrains[i]));
  }
  kv.Set("terrains", t);
  kv.Set("start_level", std::to_string(start_level));
  kv.Set("flip_period", std::to_string(flip_period));
  const EstimatorConfig& e = agent.estimator;
  kv.Set("depth_height", std::to_string(e.depth_height));
  kv.Set("depth_width", std::to_string(e.depth_width));
  kv.Set("history", std::to_string(e.history));
  kv.Set("depth_frames", std::to_string(e.depth_frames));
  kv.Set("encoder", EncoderVariantName(e.variant));
  kv.Set("ae_channels", JoinInts(agent.autoencoder.channels));
  kv.Set("ae_bottleneck", std::to_string(agent.autoencoder.bottleneck));
  kv.Set("edge_border", std::to_string(agent.edge_border));
  kv.Set("tick_steps", std::to_string(agent.tick_steps));
  kv.Set("init_log_std", Str(agent.policy.init_log_std));
  kv.Set("ppo_clip", Str(ppo.clip));
  kv.Set("ppo_epochs", std::to_string(ppo.epochs));
  kv.Set("ppo_minibatches", std::to_string(ppo.minibatches));
  kv.Set("discount", Str(ppo.discount));
  kv.Set("gae_lambda", Str(ppo.gae_lambda));
  kv.Set("entropy_coef", Str(ppo.entropy_coef));
  kv.Set("max_grad_norm", Str(ppo.max_grad_norm));
  kv.Set("actor_lr", Str(ppo.actor_adam.lr));
  kv.Set("critic_lr", Str(ppo.critic_adam.lr));
  kv.Set("reward.lin_vel", Str(rewards.lin_vel));
  kv.Set("reward.ang_vel", Str(rewards.ang_vel));
  kv.Set("reward.collision", Str(rewards.collision));
  kv.Set("reward.joint_energy", Str(rewards.joint_energy));
  kv.Set("reward.action_rate", Str(rewards.action_rate));
  kv.Set("reward.default_pos", Str(rewards.default_pos));
  kv.Set("reward.hip_pos", Str(rewards.hip_pos));
  kv.Set("reward.joint_acc", Str(rewards.joint_acc));
  kv.Set("reward.orientation", Str(rewards.orientation));
  kv.Set("cmd_phase1_min", Str(commands.phase1_min));
  kv.Set("cmd_phase2_min", Str(commands.phase2_min));
  kv.Set("cmd_max", Str(commands.max));
  kv.Set("cmd_yaw_range", Str(commands.yaw_range));
  kv.Set("cmd_p_zero", Str(commands.p_zero));
  kv.Set("curriculum_promote", Str(curriculum.promote_ratio));
  kv.Set("curriculum_demote", Str(curriculum.demote_ratio));
  kv.Set("estimator_lr", Str(estimator_lr));
  kv.Set("autoencoder_lr", Str(autoencoder_lr));
  kv.Set("supervised_max_grad_norm", Str(supervised_max_grad_norm));
  kv.Set("autoencoder_pairs", std::to_string(autoencoder_pairs));
  kv.Set("phase_threshold", Str(phase_threshold));
  kv.Set("phase_window", std::to_string(phase_window));
  kv.Set("phase_budget", Str(phase_budget));
  kv.Set("checkpoint_every", std::to_string(checkpoint_every));
  kv.Set("selector_gamma", Str(selector_gamma));
  kv.Set("beta_override", Str(beta_override));
  return kv.ToText();
}

AdaptationSchedule::AdaptationSchedule(
    const std::vector<TerrainKind>& env_terrain, int flip_period)
    : terrain_(env_terrain), offset_(env_terrain.size(), 0),
      period_(flip_period) {
  Require(flip_period >= 1, "flip period must be positive");
  int simple = 0;
  for (size_t i = 0; i < terrain_.size(); ++i) {
    if (!IsDifficult(terrain_[i])) offset_[i] = simple++ % 2;
  }
}

int AdaptationSchedule::Mask(int env, int iteration) const {
  Require(env >= 0 && env < num_envs(), "env index out of range");
  Require(iteration >= 0, "iteration must be non-negative");
  if (IsDifficult(terrain_[env])) return 0;
  return ((iteration / period_) % 2) ^ offset_[env];
}

size_t RolloutBuffer::size() const {
  size_t n = 0;
  for (const auto& s : steps) n += s.size();
  return n;
}

TrainEnv::TrainEnv(int index, TerrainKind kind, int level,
                   const AgentConfig& agent, std::uint64_t seed)
    : index_(index), kind_(kind), level_(level), rng_(seed),
      perception_(agent) {}

void TrainEnv::Reset(int phase, const CommandRanges& ranges) {
  const std::uint64_t terrain_seed = rng_();
  const std::uint64_t world_seed = rng_();
  const Command cmd = SampleCommand(rng_, phase, ranges);
  world_ = std::make_unique<World>(GenerateTerrain(kind_, level_, terrain_seed),
                                   cmd, world_seed);
  perception_.Reset();
  perception_.Observe(world_->Observation());
  episode_step_ = 0;
}

RolloutBuffer CollectRollout(Agent& agent, std::vector<TrainEnv>& envs,
                             const std::vector<int>& masks,
                             const TrainConfig& config, int phase,
                             CollectStats* stats) {
  Require(masks.size() == envs.size(), "one mask per env");
  RolloutBuffer buf;
  buf.num_envs = static_cast<int>(envs.size());
  buf.horizon = config.horizon;
  buf.steps.assign(envs.size(), {});
  Real reward_sum = 0.0, lin_sum = 0.0;
  const Real dt = WorldParams{}.dt;

  for (size_t i = 0; i < envs.size(); ++i) {
    TrainEnv& env = envs[i];
    auto& steps = buf.steps[i];
    steps.reserve(config.horizon);
    for (int t = 0; t < config.horizon; ++t) {
      World& w = env.world();
      RobotPerception& p = env.perception();
      int tick = -1;
      if (p.TickDue(env.episode_step())) {
        TickRecord rec;
        rec.env = static_cast<int>(i);
        rec.mask = masks[i];
        rec.proprio = p.proprio().Flatten();
        rec.hidden_op = p.hidden_op();
        rec.hidden_vp = p.hidden_vp();
        rec.truth = w.Privileged();
        p.Refresh(agent, w, env.rng(), masks[i]);
        rec.depth = p.depth().Flatten();
        rec.depth_warm = p.depth().warm();
        rec.depth_stage = p.newest_stage();
        tick = static_cast<int>(buf.ticks.size());
        buf.ticks.push_back(std::move(rec));
      }
      const Vec privileged = w.Privileged().Flat();
      StepRecord s;
      s.actor_in = ActorInput(p.last_obs(), p.latent());
      s.critic_in = CriticInput(p.last_obs(), p.latent(), privileged);
      const Vec mean = agent.ac.Mean(s.actor_in);
      s.action = agent.ac.Sample(mean, env.rng());
      s.log_prob = GaussianLogProb(mean, agent.ac.LogStd(), s.action);
      s.value = agent.ac.Value(s.critic_in);
      if (!steps.empty() && !steps.back().end) steps.back().next_value = s.value;

      const RobotState before = w.robot();
      const Command cmd = w.command();
      const Action act = ToWorldAction(s.action);
      const StepResult sr = w.Step(act);
      env.advance_step();
      const RewardBreakdown rb = ComputeReward(before, w, act, cmd, config.rewards);
      s.reward = rb.total;
      s.lin_vel_raw = rb.Get("lin_vel").raw;
      const Vec next_obs = w.Observation();
      if (tick >= 0) buf.ticks[tick].next_obs = next_obs;
      p.Observe(next_obs);

      if (!AllFinite(s.action) || !AllFinite(next_obs) ||
          !std::isfinite(s.reward) || !std::isfinite(s.value) ||
          !AllFinite(p.latent())) {
        std::ostringstream os;
        os << "non-finite value in rollout: env " << i << " step " << t
           << " episode_step " << env.episode_step() << "\n";
        os << DumpVec("actor_in", s.actor_in) << DumpVec("action", s.action)
           << DumpVec("next_obs", next_obs) << DumpVec("latent", p.latent())
           << "reward " << s.reward << "\nvalue " << s.value << "\n";
        throw RolloutError(os.str());
      }

      const bool terminated = sr.terminated;
      const bool truncated = env.episode_step() >= config.episode_steps;
      const bool last = t == config.horizon - 1;
      s.terminated = terminated;
      s.end = terminated || truncated || last;
      if (!terminated && (truncated || last)) {
        s.next_value = agent.ac.Value(
            CriticInput(next_obs, p.latent(), w.Privileged().Flat()));
      }
      reward_sum += s.reward;
      lin_sum += s.lin_vel_raw;
      steps.push_back(std::move(s));

      if (terminated || truncated) {
        EpisodeSummary e;
        e.env = static_cast<int>(i);
        e.distance = w.distance();
        e.commanded_distance = w.command().c_x * env.episode_step() * dt;
        e.level_before = env.level();
        e.level_after = UpdateCurriculum(
            env.level(), {e.distance, e.commanded_distance}, config.curriculum);
        env.set_level(e.level_after);
        if (stats) stats->episodes.push_back(e);
        ++buf.episodes_finished;
        env.Reset(phase, config.commands);
      }
    }
  }
  if (stats) {
    const Real n = static_cast<Real>(buf.size());
    stats->mean_reward = reward_sum / n;
    stats->mean_lin_vel = lin_sum / n;
  }
  return buf;
}

std::vector<PpoSample> BuildPpoSamples(const RolloutBuffer& buffer,
                                       Real discount, Real lambda) {
  std::vector<PpoSample> out;
  out.reserve(buffer.size());
  for (const auto& steps : buffer.steps) {
    Vec r, v, nv;
    std::vector<std::uint8_t> ends;
    for (const StepRecord& s : steps) {
      r.push_back(s.reward);
      v.push_back(s.value);
      nv.push_back(s.next_value);
      ends.push_back(s.end);
    }
    const Vec adv = ComputeGae(r, v, nv, ends, discount, lambda);
    for (size_t k = 0; k < steps.size(); ++k) {
      PpoSample p;
      p.actor_in = steps[k].actor_in;
      p.critic_in = steps[k].critic_in;
      p.action = steps[k].action;
      p.log_prob = steps[k].log_prob;
      p.value = steps[k].value;
      p.advantage = adv[k];
      p.ret = adv[k] + steps[k].value;
      out.push_back(std::move(p));
    }
  }
  return out;
}

SupervisedStats SupervisedUpdate(Agent& agent, const RolloutBuffer& buffer,
                                 const TrainConfig& config,
                                 std::mt19937_64& rng) {
  SupervisedStats st;
  std::vector<const TickRecord*> op_recs, vp_recs, ae_recs;
  for (const TickRecord& t : buffer.ticks) {
    if (t.next_obs.empty()) continue;
    op_recs.push_back(&t);
    if (t.mask == 0) vp_recs.push_back(&t);
    if (t.depth_warm && t.depth_stage == DepthStage::kRandomized) {
      ae_recs.push_back(&t);
    }
  }
  const auto op_params = agent.op.Params();
  const auto vp_params = agent.vp.Params();
  const auto him_params = agent.him.Params();
  const auto ae_params = agent.ae.Params();
  ZeroGrad(op_params);
  ZeroGrad(vp_params);
  ZeroGrad(him_params);
  ZeroGrad(ae_params);

  auto run = [&](Estimator& est, const std::vector<const TickRecord*>& recs,
                 bool vp) {
    Real total = 0.0;
    const Real inv = 1.0 / static_cast<Real>(recs.size());
    for (const TickRecord* t : recs) {
      EstimatorTape tape;
      const EstimatorOutput out = est.Forward(
          t->proprio, &t->depth, vp ? t->hidden_vp : t->hidden_op, &tape);
      ForwardResult target;
      const Vec z_hat = agent.him.Encode(t->next_obs, t->truth.v_true, &target);
      LossTerms l = vp ? LossVp(out, t->truth, z_hat)
                       : LossOp(out, t->truth, z_hat);
      total += l.total;
      ScaleOutputGrad(l.grad, inv);
      for (Real& g : l.z_hat_grad) g *= inv;
      est.Backward(tape, l.grad);
      agent.him.Backward(target, l.z_hat_grad);
    }
    return total * inv;
  };

  const AdamConfig est_adam = WithLr(config.estimator_lr);
  if (!op_recs.empty()) {
    st.loss_op = run(agent.op, op_recs, false);
    st.op_records = static_cast<int>(op_recs.size());
    ClipGradNorm(op_params, config.supervised_max_grad_norm);
    AdamUpdate(op_params, est_adam);
  }
  if (!vp_recs.empty()) {
    st.loss_vp = run(agent.vp, vp_recs, true);
    st.vp_records = static_cast<int>(vp_recs.size());
    ClipGradNorm(vp_params, config.supervised_max_grad_norm);
    AdamUpdate(vp_params, est_adam);
  }
  if (!op_recs.empty()) {
    ClipGradNorm(him_params, config.supervised_max_grad_norm);
    AdamUpdate(him_params, est_adam);
  }

  if (!ae_recs.empty()) {
    if (static_cast<int>(ae_recs.size()) > config.autoencoder_pairs) {
      std::shuffle(ae_recs.begin(), ae_recs.end(), rng);
      ae_recs.resize(config.autoencoder_pairs);
    }
    Real total = 0.0;
    for (const TickRecord* t : ae_recs) {
      total += agent.ae.AccumulateGradient(t->depth);
    }
    const Real inv = 1.0 / static_cast<Real>(ae_recs.size());
    ScaleGrad(ae_params, inv);
    ClipGradNorm(ae_params, config.supervised_max_grad_norm);
    AdamUpdate(ae_params, WithLr(config.autoencoder_lr));
    st.loss_ad = total * inv;
    st.ae_pairs = static_cast<int>(ae_recs.size());
  }
  return st;
}

PhaseLatch::PhaseLatch(Real threshold, int window, int budget_iteration)
    : threshold_(threshold), window_(window), budget_(budget_iteration) {
  Require(window >= 1, "phase window must be positive");
}

int PhaseLatch::Advance(int iteration, Real tracking_reward) {
  if (phase_ == 2) return phase_;
  recent_.push_back(tracking_reward);
  while (static_cast<int>(recent_.size()) > window_) recent_.pop_front();
  const Real mean =
      std::accumulate(recent_.begin(), recent_.end(), 0.0) / recent_.size();
  const bool crossed =
      static_cast<int>(recent_.size()) == window_ && mean >= threshold_;
  if (crossed || iteration + 1 >= budget_) phase_ = 2;
  return phase_;
}

std::string MetricsCsvHeader() {
  return "schema,iteration,phase,mean_reward,mean_lin_vel,episodes,mean_level,"
         "mask_ratio,loss_op,loss_vp,loss_ad,op_records,vp_records,ae_pairs,"
         "surrogate,value_loss,entropy,clip_fraction,actor_grad_norm,"
         "adv_norm_skipped";
}

std::string MetricsCsvRow(const IterationMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << kMetricsSchemaVersion << ',' << m.iteration << ',' << m.phase << ','
     << m.mean_reward << ',' << m.mean_lin_vel << ',' << m.episodes << ','
     << m.mean_level << ',' << m.mask_ratio << ',' << m.supervised.loss_op
     << ',' << m.supervised.loss_vp << ',' << m.supervised.loss_ad << ','
     << m.supervised.op_records << ',' << m.supervised.vp_records << ','
     << m.supervised.ae_pairs << ',' << m.ppo.surrogate << ','
     << m.ppo.value_loss << ',' << m.ppo.entropy << ',' << m.ppo.clip_fraction
     << ',' << m.ppo.actor_grad_norm << ',' << m.ppo.normalization_skipped;
  return os.str();
}

namespace {

std::vector<TerrainKind> EnvTerrains(const TrainConfig& c) {
  std::vector<TerrainKind> t;
  for (int i = 0; i < c.num_envs; ++i) {
    t.push_back(c.terrains[i % c.terrains.size()]);
  }
  return t;
}

TrainConfig Harmonized(TrainConfig c) {
  c.agent.Harmonize();
  return c;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config)
    : config_(Harmonized(config)),
      agent_(config_.agent, Mix(config.seed, 1)),
      schedule_(EnvTerrains(config), config.flip_period),
      phase_(config.phase_threshold, config.phase_window,
             static_cast<int>(config.phase_budget * config.iterations)),
      rng_(Mix(config.seed, 2)) {
  for (int i = 0; i < config.num_envs; ++i) {
    const TerrainKind kind = schedule_.terrain(i);
    envs_.emplace_back(i, kind, config.start_level, config_.agent,
                       Mix(config.seed, 100 + i));
    envs_.back().Reset(1, config.commands);
  }
}

IterationMetrics Trainer::Iterate() {
  IterationMetrics m;
  m.iteration = iteration_;
  m.phase = phase_.phase();
  masks_.resize(envs_.size());
  int ones = 0;
  for (size_t i = 0; i < envs_.size(); ++i) {
    masks_[i] = schedule_.Mask(static_cast<int>(i), iteration_);
    ones += masks_[i];
  }
  m.mask_ratio = static_cast<Real>(ones) / envs_.size();

  CollectStats cs;
  const RolloutBuffer buf =
      CollectRollout(agent_, envs_, masks_, config_, m.phase, &cs);
  m.mean_reward = cs.mean_reward;
  m.mean_lin_vel = cs.mean_lin_vel;
  m.episodes = buf.episodes_finished;

  std::vector<PpoSample> samples =
      BuildPpoSamples(buf, config_.ppo.discount, config_.ppo.gae_lambda);
  m.ppo = PpoUpdate(agent_.ac, samples, config_.ppo, rng_);
  m.supervised = SupervisedUpdate(agent_, buf, config_, rng_);

  Real level_sum = 0.0;
  for (const TrainEnv& e : envs_) level_sum += e.level();
  m.mean_level = level_sum / envs_.size();
  phase_.Advance(iteration_, m.mean_lin_vel);
  ++iteration_;
  return m;
}

Checkpoint Trainer::MakeCheckpoint() const {
  Checkpoint c;
  agent_.Save(c);
  c.SetMeta("iteration", std::to_string(iteration_));
  c.SetMeta("seed", std::to_string(config_.seed));
  c.SetMeta("phase", std::to_string(phase_.phase()));
  c.SetMeta("gamma", Str(config_.selector_gamma));
  if (config_.beta_override >= 0.0) c.SetMeta("beta", Str(config_.beta_override));
  return c;
}

void Trainer::Train(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream cfg(dir / "config.txt");
    cfg << config_.ToText();
  }
  std::ofstream metrics(dir / "metrics.csv");
  std::ofstream masks(dir / "masks.csv");
  Require(metrics.good() && masks.good(),
          "cannot write training outputs under '" + out_dir + "'");
  metrics << MetricsCsvHeader() << "\n";
  masks << "schema,iteration,env,terrain,mask\n";
  while (iteration_ < config_.iterations) {
    const int it = iteration_;
    try {
      const IterationMetrics m = Iterate();
      metrics << MetricsCsvRow(m) << "\n" << std::flush;
      for (size_t i = 0; i < masks_.size(); ++i) {
        masks << kMetricsSchemaVersion << ',' << it << ',' << i << ','
              << TerrainKindName(schedule_.terrain(i)) << ',' << masks_[i]
              << "\n";
      }
      masks.flush();
      if (config_.checkpoint_every > 0 &&
          iteration_ % config_.checkpoint_every == 0) {
        MakeCheckpoint().Save(
            (dir / ("checkpoint_" + std::to_string(iteration_) + ".ckpt"))
                .string());
      }
    } catch (const std::exception& e) {
      std::ofstream fail(dir / "failure.txt");
      fail << "iteration " << it << "\n" << e.what() << "\n";
      throw;
    }
  }
  MakeCheckpoint().Save((dir / "checkpoint.ckpt").string());
}

}  // namespace redest
