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

#include "redest/policy.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "redest/error.h"

namespace redest {
namespace {

constexpr Real kLog2Pi = 1.8378770664093453;

LayerStack BuildMlp(int in, const std::vector<int>& hidden, int out) {
  LayerStack s(Shape{in});
  for (int h : hidden) s.Linear(h).Elu();
  s.Linear(out);
  return s;
}

}  // namespace

Vec ActorInput(std::span<const Real> obs, std::span<const Real> latent) {
  Vec v(obs.begin(), obs.end());
  v.insert(v.end(), latent.begin(), latent.end());
  return v;
}

Vec CriticInput(std::span<const Real> obs, std::span<const Real> latent,
                std::span<const Real> privileged) {
  Vec v = ActorInput(obs, latent);
  v.insert(v.end(), privileged.begin(), privileged.end());
  return v;
}

Real GaussianLogProb(std::span<const Real> mean, std::span<const Real> log_std,
                     std::span<const Real> action) {
  Require(mean.size() == log_std.size() && mean.size() == action.size(),
          "gaussian log-prob size mismatch");
  Real lp = 0.0;
  for (size_t i = 0; i < mean.size(); ++i) {
    const Real z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

Real GaussianEntropy(std::span<const Real> log_std) {
  Real h = 0.0;
  for (Real l : log_std) h += 0.5 * (kLog2Pi + 1.0) + l;
  return h;
}

ActorCritic::ActorCritic(const PolicyConfig& config, std::uint64_t seed)
    : config_(config),
      actor_(BuildMlp(config.actor_input(), config.actor_hidden, kActionDim)),
      critic_(BuildMlp(config.critic_input(), config.critic_hidden, 1)),
      log_std_(Shape{kActionDim}) {
  std::mt19937_64 rng(seed);
  actor_.Init(rng);
  critic_.Init(rng);
  // Near-zero initial mean so early exploration is centered.
  actor_.ScaleLastLinear(0.01);
  std::fill(log_std_.values.begin(), log_std_.values.end(),
            config.init_log_std);
}

Vec ActorCritic::Mean(std::span<const Real> actor_in,
                      ForwardResult* fwd) const {
  if (fwd == nullptr) return actor_.Apply(actor_in);
  *fwd = actor_.Forward(actor_in);
  return fwd->output;
}

Real ActorCritic::Value(std::span<const Real> critic_in,
                        ForwardResult* fwd) const {
  if (fwd == nullptr) return critic_.Apply(critic_in)[0];
  *fwd = critic_.Forward(critic_in);
  return fwd->output[0];
}

Vec ActorCritic::LogStd() const {
  Vec l = log_std_.values;
  for (Real& v : l) v = std::clamp(v, config_.min_log_std, config_.max_log_std);
  return l;
}

Vec ActorCritic::Sample(std::span<const Real> mean,
                        std::mt19937_64& rng) const {
  const Vec ls = LogStd();
  std::normal_distribution<Real> n(0.0, 1.0);
  Vec a(mean.begin(), mean.end());
  for (size_t i = 0; i < a.size(); ++i) a[i] += std::exp(ls[i]) * n(rng);
  return a;
}

std::vector<TensorParam*> ActorCritic::ActorParams() {
  std::vector<TensorParam*> p = actor_.Params();
  p.push_back(&log_std_);
  return p;
}

void ActorCritic::Save(Checkpoint& ckpt) const {
  ckpt.AddStack("actor", actor_);
  ckpt.AddStack("critic", critic_);
  ckpt.AddTensor("log_std", log_std_);
}

void ActorCritic::Load(const Checkpoint& ckpt) {
  ckpt.RestoreInto("actor", actor_);
  ckpt.RestoreInto("critic", critic_);
  ckpt.RestoreInto("log_std", log_std_);
}

Action ToWorldAction(std::span<const Real> a) {
  Require(a.size() == kActionDim, "action width mismatch");
  return {std::clamp(a[0], -1.0, 1.0), std::clamp(a[1], -1.0, 1.0)};
}

Vec ComputeGae(std::span<const Real> rewards, std::span<const Real> values,
               std::span<const Real> next_values,
               std::span<const std::uint8_t> ends, Real discount,
               Real lambda) {
  const size_t n = rewards.size();
  Require(values.size() == n && next_values.size() == n && ends.size() == n,
          "advantage inputs differ in length");
  Vec adv(n, 0.0);
  Real running = 0.0;
  for (size_t k = n; k-- > 0;) {
    if (ends[k]) running = 0.0;
    const Real delta = rewards[k] + discount * next_values[k] - values[k];
    running = delta + discount * lambda * running;
    adv[k] = running;
  }
  return adv;
}

bool NormalizeAdvantages(Vec& advantages) {
  if (advantages.empty()) return false;
  const Real n = static_cast<Real>(advantages.size());
  const Real mean =
      std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  Real var = 0.0;
  for (Real a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  if (var < 1e-12) return false;
  const Real inv = 1.0 / std::sqrt(var);
  for (Real& a : advantages) a = (a - mean) * inv;
  return true;
}

Real ClippedSurrogate(Real ratio, Real advantage, Real clip) {
  const Real clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

Real ClippedSurrogateGrad(Real ratio, Real advantage, Real clip) {
  const Real clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  // The unclipped branch is active when it is the smaller one.
  if (ratio * advantage <= clipped * advantage) return advantage;
  return 0.0;
}

Real AccumulateActorGradient(ActorCritic& ac,
                             const std::vector<const PpoSample*>& batch,
                             const PpoConfig& config, Real* clip_fraction) {
  Require(!batch.empty(), "empty minibatch");
  const PolicyConfig& pc = ac.config();
  const Vec log_std = ac.LogStd();
  const Real inv_n = 1.0 / static_cast<Real>(batch.size());
  Vec log_std_grad(kActionDim, 0.0);
  Real surrogate = 0.0;
  int clipped = 0;
  for (const PpoSample* s : batch) {
    ForwardResult fwd;
    const Vec mean = ac.Mean(s->actor_in, &fwd);
    const Real lp = GaussianLogProb(mean, log_std, s->action);
    const Real ratio = std::exp(lp - s->log_prob);
    surrogate += ClippedSurrogate(ratio, s->advantage, config.clip);
    if (std::abs(ratio - 1.0) > config.clip) ++clipped;
    // Loss is -surrogate; d ratio / d lp = ratio.
    const Real dl_dlp =
        -ClippedSurrogateGrad(ratio, s->advantage, config.clip) * ratio * inv_n;
    if (dl_dlp == 0.0) continue;
    Vec g_mean(kActionDim);
    for (int i = 0; i < kActionDim; ++i) {
      const Real var = std::exp(2.0 * log_std[i]);
      const Real d = s->action[i] - mean[i];
      g_mean[i] = dl_dlp * d / var;
      log_std_grad[i] += dl_dlp * (d * d / var - 1.0);
    }
    ac.actor().Backward(fwd.tape, g_mean);
  }
  // Entropy bonus: dH / d log_std = 1 per component.
  for (int i = 0; i < kActionDim; ++i) log_std_grad[i] -= config.entropy_coef;
  TensorParam& ls = ac.log_std();
  for (int i = 0; i < kActionDim; ++i) {
    const Real raw = ls.values[i];
    if (raw > pc.min_log_std && raw < pc.max_log_std) {
      ls.grad[i] += log_std_grad[i];
    }
  }
  if (clip_fraction != nullptr) *clip_fraction = clipped * inv_n;
  return surrogate * inv_n;
}

PpoStats PpoUpdate(ActorCritic& ac, std::vector<PpoSample>& samples,
                   const PpoConfig& config, std::mt19937_64& rng) {
  Require(!samples.empty(), "ppo update needs samples");
  Require(config.epochs >= 1 && config.minibatches >= 1,
          "ppo needs at least one epoch and minibatch");
  PpoStats stats;
  Vec adv(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) adv[i] = samples[i].advantage;
  stats.normalization_skipped = !NormalizeAdvantages(adv);
  for (size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv[i];

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto actor_params = ac.ActorParams();
  const auto critic_params = ac.CriticParams();
  const int mb = std::min<int>(config.minibatches, samples.size());
  int updates = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int b = 0; b < mb; ++b) {
      const size_t lo = order.size() * b / mb;
      const size_t hi = order.size() * (b + 1) / mb;
      std::vector<const PpoSample*> batch;
      for (size_t k = lo; k < hi; ++k) batch.push_back(&samples[order[k]]);

      ZeroGrad(actor_params);
      Real clip_frac = 0.0;
      stats.surrogate += AccumulateActorGradient(ac, batch, config, &clip_frac);
      stats.clip_fraction += clip_frac;
      stats.actor_grad_norm += ClipGradNorm(actor_params, config.max_grad_norm);
      AdamUpdate(actor_params, config.actor_adam);

      ZeroGrad(critic_params);
      const Real inv_n = 1.0 / static_cast<Real>(batch.size());
      Real vloss = 0.0;
      for (const PpoSample* s : batch) {
        ForwardResult fwd;
        const Real v = ac.Value(s->critic_in, &fwd);
        const Real e = v - s->ret;
        vloss += 0.5 * e * e * inv_n;
        const Real g = e * inv_n;
        ac.critic().Backward(fwd.tape, std::span<const Real>(&g, 1));
      }
      stats.value_loss += vloss;
      ClipGradNorm(critic_params, config.max_grad_norm);
      AdamUpdate(critic_params, config.critic_adam);
      ++updates;
    }
  }
  stats.surrogate /= updates;
  stats.value_loss /= updates;
  stats.clip_fraction /= updates;
  stats.actor_grad_norm /= updates;
  stats.entropy = GaussianEntropy(ac.LogStd());
  return stats;
}

}  // namespace redest
