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

#include "redest/loss_checks.h"

#include <algorithm>
#include <cmath>

#include "redest/optim.h"
#include "redest/selector.h"

namespace redest {
namespace {

Vec Gaussian(std::mt19937_64& rng, int n, Real scale = 1.0) {
  std::normal_distribution<Real> d(0.0, scale);
  Vec v(n);
  for (Real& x : v) x = d(rng);
  return v;
}

// Keeps the fan-in scaled weights from construction and jitters every value
// so biases are non-zero.
void Jitter(const std::vector<TensorParam*>& params, std::mt19937_64& rng) {
  std::normal_distribution<Real> d(0.0, 0.1);
  for (TensorParam* p : params) {
    for (Real& v : p->values) v += d(rng);
  }
}

void AddBlocks(std::vector<GradBlock>& blocks, const std::string& prefix,
               const std::vector<TensorParam*>& params) {
  int i = 0;
  for (TensorParam* p : params) {
    blocks.push_back({prefix + std::to_string(i++), p->values.data(),
                      p->size(), p->grad});
  }
}

}  // namespace

EstimatorConfig SmallEstimatorConfig(EncoderVariant variant) {
  EstimatorConfig c;
  c.obs_dim = 3;
  c.history = 2;
  c.depth_height = 6;
  c.depth_width = 8;
  c.embed_hidden = 5;
  c.embed_dim = 4;
  c.depth_embed = 4;
  c.token_dim = 2;
  c.encoder_out = 4;
  c.gru_hidden = 3;
  c.latent = 2;
  c.him_dim = 2;
  c.him_hidden = 3;
  c.variant = variant;
  return c;
}

Real EstimatorLossGradError(EstimatorKind kind, EncoderVariant variant,
                            std::mt19937_64& rng) {
  const EstimatorConfig c = SmallEstimatorConfig(variant);
  Estimator est(kind, c, rng());
  HimTarget him(c, rng());
  Jitter(est.Params(), rng);
  Jitter(him.Params(), rng);
  const Vec proprio = Gaussian(rng, c.history * c.obs_dim);
  const Vec depth = Gaussian(rng, ShapeSize(c.DepthShape()));
  Vec hidden = Gaussian(rng, c.gru_hidden, 0.5);
  for (Real& h : hidden) h = std::tanh(h);
  const Vec next_obs = Gaussian(rng, c.obs_dim);
  PrivilegedInfo truth;
  std::uniform_real_distribution<Real> u(-1.0, 1.0);
  for (Real& v : truth.v_true) v = u(rng);
  for (Real& v : truth.m_t) v = 0.3 + 0.2 * u(rng);
  for (Real& v : truth.h_f) v = 0.1 + 0.1 * u(rng);
  const bool vp = kind == EstimatorKind::kVp;

  auto loss_of = [&](EstimatorTape* tape, ForwardResult* target_fwd) {
    const EstimatorOutput out = est.Forward(proprio, &depth, hidden, tape);
    const Vec z_hat = him.Encode(next_obs, truth.v_true, target_fwd);
    return vp ? LossVp(out, truth, z_hat) : LossOp(out, truth, z_hat);
  };
  est.ZeroGrad();
  ZeroGrad(him.Params());
  EstimatorTape tape;
  ForwardResult target_fwd;
  const LossTerms l = loss_of(&tape, &target_fwd);
  est.Backward(tape, l.grad);
  him.Backward(target_fwd, l.z_hat_grad);

  std::vector<GradBlock> blocks;
  AddBlocks(blocks, "estimator", est.Params());
  AddBlocks(blocks, "target", him.Params());
  const Real err = FiniteDifferenceError(
      [&] { return loss_of(nullptr, nullptr).total; }, blocks);
  est.ZeroGrad();
  ZeroGrad(him.Params());
  return err;
}

Real AutoencoderLossGradError(std::mt19937_64& rng) {
  AutoencoderConfig c;
  c.input = {2, 6, 8};
  c.channels = {3, 4, 4};
  c.bottleneck = 8;
  Autoencoder ae(c, rng());
  Jitter(ae.Params(), rng);
  Vec frames = Gaussian(rng, ae.input_size(), 0.5);
  for (Real& f : frames) f += 1.0;

  ZeroGrad(ae.Params());
  Vec input_grad;
  ae.AccumulateGradient(frames, &input_grad);

  std::vector<GradBlock> blocks;
  blocks.push_back({"frames", frames.data(), frames.size(), input_grad});
  AddBlocks(blocks, "autoencoder", ae.Params());
  const Real err = FiniteDifferenceError(
      [&] { return LossAd(frames, ae.Reconstruct(frames)); }, blocks);
  ZeroGrad(ae.Params());
  return err;
}

std::vector<GradCheckResult> RunLossGradChecks(int instances,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  for (EstimatorKind kind : {EstimatorKind::kOp, EstimatorKind::kVp}) {
    GradCheckResult r;
    r.name = kind == EstimatorKind::kOp ? "loss_op" : "loss_vp";
    for (EncoderVariant v : {EncoderVariant::kMlp, EncoderVariant::kAttention}) {
      for (int i = 0; i < instances; ++i) {
        r.worst_error = std::max(r.worst_error, EstimatorLossGradError(kind, v, rng));
        ++r.instances;
      }
    }
    out.push_back(r);
  }
  GradCheckResult ad;
  ad.name = "loss_ad";
  for (int i = 0; i < instances; ++i) {
    ad.worst_error = std::max(ad.worst_error, AutoencoderLossGradError(rng));
    ++ad.instances;
  }
  out.push_back(ad);
  return out;
}

}  // namespace redest
