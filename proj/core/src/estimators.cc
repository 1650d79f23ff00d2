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

#include "redest/estimators.h"

#include <algorithm>

#include "redest/error.h"

namespace redest {
namespace {

void Append(Vec& dst, std::span<const Real> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

void AppendOr0(Vec& dst, const Vec& src, int n) {
  if (src.empty()) {
    dst.insert(dst.end(), n, 0.0);
  } else {
    Require(static_cast<int>(src.size()) == n, "output gradient width mismatch");
    Append(dst, src);
  }
}

Vec Slice(const Vec& v, int begin, int n) {
  return Vec(v.begin() + begin, v.begin() + begin + n);
}

// d/da of Mse(a, b).
Vec MseGrad(std::span<const Real> a, std::span<const Real> b) {
  Vec g(a.size());
  for (size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * (a[i] - b[i]) / a.size();
  return g;
}

}  // namespace

const char* EncoderVariantName(EncoderVariant v) {
  return v == EncoderVariant::kMlp ? "mlp" : "attention_1h";
}

EncoderVariant EncoderVariantFromName(const std::string& name) {
  if (name == "mlp") return EncoderVariant::kMlp;
  if (name == "attention_1h" || name == "attention") {
    return EncoderVariant::kAttention;
  }
  throw ContractError("unknown encoder variant '" + name + "'");
}

ProprioBuffer::ProprioBuffer(int history, int obs_dim)
    : history_(history), obs_dim_(obs_dim) {
  Require(history > 0 && obs_dim > 0, "proprio buffer needs positive sizes");
  Reset();
}

void ProprioBuffer::Push(std::span<const Real> obs) {
  Require(static_cast<int>(obs.size()) == obs_dim_,
          "observation width " + std::to_string(obs.size()) + " != " +
              std::to_string(obs_dim_));
  ring_.pop_front();
  ring_.emplace_back(obs.begin(), obs.end());
  ++count_;
}

void ProprioBuffer::Reset() {
  ring_.assign(history_, Vec(obs_dim_, 0.0));
  count_ = 0;
}

Vec ProprioBuffer::Flatten() const {
  Vec out;
  out.reserve(static_cast<size_t>(history_) * obs_dim_);
  for (const Vec& o : ring_) Append(out, o);
  return out;
}

DepthBuffer::DepthBuffer(int frames, int height, int width)
    : frames_(frames), height_(height), width_(width) {
  Require(frames > 0 && height > 0 && width > 0,
          "depth buffer needs positive sizes");
  Reset();
}

void DepthBuffer::Push(const DepthImage& image) {
  Require(image.height == height_ && image.width == width_,
          "depth frame " + std::to_string(image.height) + "x" +
              std::to_string(image.width) + " does not match buffer " +
              std::to_string(height_) + "x" + std::to_string(width_));
  ring_.pop_back();
  ring_.push_front(image);
  ++count_;
}

void DepthBuffer::Reset() {
  DepthImage pad;
  pad.height = height_;
  pad.width = width_;
  pad.data.assign(static_cast<size_t>(height_) * width_, 0.0);
  ring_.assign(frames_, pad);
  count_ = 0;
}

Vec DepthBuffer::Flatten() const {
  Vec out;
  out.reserve(static_cast<size_t>(frames_) * height_ * width_);
  for (const DepthImage& d : ring_) Append(out, d.data);
  return out;
}

LayerStack BuildEncoder(EncoderVariant variant, int input_width, int token_dim,
                        int out_width) {
  LayerStack s({input_width});
  if (variant == EncoderVariant::kMlp) {
    s.Linear(out_width).Elu();
  } else {
    Require(token_dim > 0 && input_width % token_dim == 0,
            "attention encoder input " + std::to_string(input_width) +
                " is not a whole number of " + std::to_string(token_dim) +
                "-wide tokens");
    s.Attention1h(input_width / token_dim, token_dim, token_dim)
        .Linear(out_width)
        .Elu();
  }
  return s;
}

Vec EncodeFuse(const LayerStack& encoder, const std::vector<Vec>& embeds) {
  Require(!embeds.empty(), "encoder needs at least one embedding");
  Vec cat;
  for (const Vec& e : embeds) Append(cat, e);
  return encoder.Apply(cat);
}

Estimator::Estimator(EstimatorKind kind, const EstimatorConfig& config,
                     std::uint64_t seed)
    : kind_(kind), config_(config) {
  const EstimatorConfig& c = config_;
  std::mt19937_64 rng(seed);
  embed_ = LayerStack({c.history * c.obs_dim});
  embed_.Linear(c.embed_hidden).Elu().Linear(c.embed_dim).Elu();
  embed_.Init(rng);
  int enc_in = c.embed_dim;
  if (kind_ == EstimatorKind::kVp) {
    cnn_ = LayerStack(c.DepthShape());
    cnn_.Conv2d(8, 3, 2, 1).Elu().Conv2d(16, 3, 2, 1).Elu().Conv2d(16, 3, 2, 1)
        .Elu().Flatten().Linear(c.depth_embed).Elu();
    cnn_.Init(rng);
    enc_in += c.depth_embed;
  }
  encoder_ = BuildEncoder(c.variant, enc_in, c.token_dim, c.encoder_out);
  encoder_.Init(rng);
  gru_ = LayerStack({c.encoder_out});
  gru_.GruCell(c.gru_hidden);
  gru_.Init(rng);
  heads_ = LayerStack({c.gru_hidden});
  heads_.Linear(head_width());
  heads_.Init(rng);
}

int Estimator::head_width() const {
  const EstimatorConfig& c = config_;
  int w = c.latent + c.velocity + c.him_dim;
  if (kind_ == EstimatorKind::kVp) w += c.feet + c.profile;
  return w;
}

EstimatorOutput Estimator::Forward(const Vec& proprio, const Vec* depth,
                                   std::span<const Real> hidden,
                                   EstimatorTape* tape) const {
  EstimatorTape local;
  EstimatorTape& t = tape ? *tape : local;
  t.embed = embed_.Forward(proprio);
  Vec cat = t.embed.output;
  if (kind_ == EstimatorKind::kVp) {
    Require(depth != nullptr, "VP estimator needs depth frames");
    t.cnn = cnn_.Forward(*depth);
    Append(cat, t.cnn.output);
  }
  t.encoder = encoder_.Forward(cat);
  t.gru = gru_.Forward(t.encoder.output, hidden);
  t.heads = heads_.Forward(t.gru.output);

  const EstimatorConfig& c = config_;
  const Vec& y = t.heads.output;
  EstimatorOutput out;
  int at = 0;
  out.h = Slice(y, at, c.latent);
  at += c.latent;
  out.v_hat = Slice(y, at, c.velocity);
  at += c.velocity;
  out.z_o = Slice(y, at, c.him_dim);
  at += c.him_dim;
  if (kind_ == EstimatorKind::kVp) {
    out.h_f_hat = Slice(y, at, c.feet);
    at += c.feet;
    out.m_t_hat = Slice(y, at, c.profile);
  }
  out.gru_hidden = *t.gru.new_hidden;
  return out;
}

EstimatorOutput Estimator::Forward(const ProprioBuffer& proprio,
                                   const DepthBuffer* depth,
                                   std::span<const Real> hidden) const {
  const Vec p = proprio.Flatten();
  if (kind_ == EstimatorKind::kVp) {
    Require(depth != nullptr, "VP estimator needs depth frames");
    const Vec d = depth->Flatten();
    return Forward(p, &d, hidden);
  }
  return Forward(p, nullptr, hidden);
}

void Estimator::Backward(const EstimatorTape& tape, const OutputGrad& g) {
  const EstimatorConfig& c = config_;
  Vec gy;
  gy.reserve(head_width());
  AppendOr0(gy, g.h, c.latent);
  AppendOr0(gy, g.v_hat, c.velocity);
  AppendOr0(gy, g.z_o, c.him_dim);
  if (kind_ == EstimatorKind::kVp) {
    AppendOr0(gy, g.h_f_hat, c.feet);
    AppendOr0(gy, g.m_t_hat, c.profile);
  }
  const Vec g_gru = heads_.Backward(tape.heads.tape, gy).input_grad;
  const Vec g_enc = gru_.Backward(tape.gru.tape, g_gru).input_grad;
  const Vec g_cat = encoder_.Backward(tape.encoder.tape, g_enc).input_grad;
  embed_.Backward(tape.embed.tape,
                  std::span<const Real>(g_cat.data(), c.embed_dim));
  if (kind_ == EstimatorKind::kVp) {
    cnn_.Backward(tape.cnn.tape, std::span<const Real>(
                                     g_cat.data() + c.embed_dim, c.depth_embed));
  }
}

std::vector<TensorParam*> Estimator::Params() {
  std::vector<TensorParam*> out;
  for (LayerStack* s : {&embed_, &cnn_, &encoder_, &gru_, &heads_}) {
    for (TensorParam* p : s->Params()) out.push_back(p);
  }
  return out;
}

void Estimator::ZeroGrad() {
  for (TensorParam* p : Params()) p->ZeroGrad();
}

void Estimator::ZeroHeads() {
  for (TensorParam* p : heads_.Params()) {
    std::fill(p->values.begin(), p->values.end(), 0.0);
  }
}

void Estimator::Save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.AddStack(prefix + "_embed", embed_);
  if (kind_ == EstimatorKind::kVp) ckpt.AddStack(prefix + "_cnn", cnn_);
  ckpt.AddStack(prefix + "_encoder", encoder_);
  ckpt.AddStack(prefix + "_gru", gru_);
  ckpt.AddStack(prefix + "_heads", heads_);
}

void Estimator::Load(const Checkpoint& ckpt, const std::string& prefix) {
  ckpt.RestoreInto(prefix + "_embed", embed_);
  if (kind_ == EstimatorKind::kVp) ckpt.RestoreInto(prefix + "_cnn", cnn_);
  ckpt.RestoreInto(prefix + "_encoder", encoder_);
  ckpt.RestoreInto(prefix + "_gru", gru_);
  ckpt.RestoreInto(prefix + "_heads", heads_);
}

HimTarget::HimTarget(const EstimatorConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  stack_ = LayerStack({c.obs_dim + c.velocity});
  stack_.Linear(c.him_hidden).Elu().Linear(c.him_dim);
  stack_.Init(rng);
}

Vec HimTarget::Encode(std::span<const Real> next_obs,
                      std::span<const Real> v_true, ForwardResult* fwd) const {
  Vec in(next_obs.begin(), next_obs.end());
  Append(in, v_true);
  ForwardResult r = stack_.Forward(in);
  Vec z = r.output;
  if (fwd) *fwd = std::move(r);
  return z;
}

void HimTarget::Backward(const ForwardResult& fwd,
                         std::span<const Real> grad_z) {
  stack_.Backward(fwd.tape, grad_z);
}

Real Mse(std::span<const Real> a, std::span<const Real> b) {
  Require(a.size() == b.size() && !a.empty(),
          "mse needs equal non-empty widths, got " + std::to_string(a.size()) +
              " and " + std::to_string(b.size()));
  Real s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / a.size();
}

LossTerms LossOp(const EstimatorOutput& out, const PrivilegedInfo& truth,
                 std::span<const Real> z_hat) {
  LossTerms l;
  l.velocity = Mse(out.v_hat, truth.v_true);
  l.him = Mse(out.z_o, z_hat);
  l.total = l.velocity + l.him;
  l.grad.v_hat = MseGrad(out.v_hat, truth.v_true);
  l.grad.z_o = MseGrad(out.z_o, z_hat);
  l.z_hat_grad = MseGrad(z_hat, out.z_o);
  return l;
}

LossTerms LossVp(const EstimatorOutput& out, const PrivilegedInfo& truth,
                 std::span<const Real> z_hat) {
  Require(out.h_f_hat.has_value() && out.m_t_hat.has_value(),
          "VP loss needs feet and profile predictions");
  LossTerms l = LossOp(out, truth, z_hat);
  l.feet = Mse(*out.h_f_hat, truth.h_f);
  l.profile = Mse(*out.m_t_hat, truth.m_t);
  l.total = l.velocity + l.him + l.feet + l.profile;
  l.grad.h_f_hat = MseGrad(*out.h_f_hat, truth.h_f);
  l.grad.m_t_hat = MseGrad(*out.m_t_hat, truth.m_t);
  return l;
}

Vec FuseLatent(std::span<const Real> h_b, std::span<const Real> h_v,
               int mask) {
  Require(mask == 0 || mask == 1,
          "mask must be 0 or 1, got " + std::to_string(mask));
  Require(h_b.size() == h_v.size(), "latent widths differ");
  Vec out(h_b.size() + h_v.size(), 0.0);
  if (mask == 1) {
    std::copy(h_b.begin(), h_b.end(), out.begin());
  } else {
    std::copy(h_v.begin(), h_v.end(), out.begin() + h_b.size());
  }
  return out;
}

}  // namespace redest
