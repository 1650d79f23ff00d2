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

// Proprioceptive (OP) and vision-proprioceptive (VP) state estimators.
//
//   proprio history -> embed MLP --+
//                                  +-> encoder -> GRU -> heads
//   depth frames    -> CNN --------+   (VP only)
//
// The heads produce the policy latent h, a velocity estimate, the latent z_o
// matched against a target encoder of the next observation, and for VP the
// feet clearance and the height profile.

#ifndef REDEST_ESTIMATORS_H_
#define REDEST_ESTIMATORS_H_

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "redest/checkpoint.h"
#include "redest/depth.h"
#include "redest/nn.h"
#include "redest/world.h"

namespace redest {

enum class EncoderVariant { kMlp, kAttention };
const char* EncoderVariantName(EncoderVariant v);
EncoderVariant EncoderVariantFromName(const std::string& name);

enum class EstimatorKind { kOp, kVp };

struct EstimatorConfig {
  int obs_dim = kObsDim;
  int history = 10;
  int depth_frames = 2;
  int depth_height = 12;
  int depth_width = 16;
  int embed_hidden = 128;
  int embed_dim = 64;
  int depth_embed = 64;
  int token_dim = 16;
  int encoder_out = 64;
  int gru_hidden = 64;
  int latent = 32;
  int him_dim = 16;
  int him_hidden = 64;
  int profile = kProfileSamples;
  int feet = 2;
  int velocity = 2;
  EncoderVariant variant = EncoderVariant::kMlp;

  Shape DepthShape() const { return {depth_frames, depth_height, depth_width}; }
};

// Last `history` observations, oldest first, zero-padded until warm.
class ProprioBuffer {
 public:
  ProprioBuffer(int history, int obs_dim);
  void Push(std::span<const Real> obs);
  void Reset();
  bool warm() const { return count_ >= history_; }
  int history() const { return history_; }
  Vec Flatten() const;

 private:
  int history_, obs_dim_, count_ = 0;
  std::deque<Vec> ring_;
};

// Last `frames` depth images, newest first, zero-padded until warm.
class DepthBuffer {
 public:
  DepthBuffer(int frames, int height, int width);
  void Push(const DepthImage& image);
  void Reset();
  bool warm() const { return count_ >= frames_; }
  const DepthImage& frame(int i) const { return ring_[i]; }
  // (frames, H, W) with the newest frame in channel 0.
  Vec Flatten() const;

 private:
  int frames_, height_, width_, count_ = 0;
  std::deque<DepthImage> ring_;
};

struct EstimatorOutput {
  Vec h;
  Vec v_hat;
  Vec z_o;
  std::optional<Vec> h_f_hat;
  std::optional<Vec> m_t_hat;
  Vec gru_hidden;
};

// Gradients of a loss w.r.t. each estimator output. Empty vectors count as
// zero.
struct OutputGrad {
  Vec h, v_hat, z_o, h_f_hat, m_t_hat;
};

// Everything needed to backpropagate one forward pass. The incoming hidden
// state is treated as a constant (truncation length 1).
struct EstimatorTape {
  ForwardResult embed, cnn, encoder, gru, heads;
};

class Estimator {
 public:
  Estimator(EstimatorKind kind, const EstimatorConfig& config,
            std::uint64_t seed);

  EstimatorKind kind() const { return kind_; }
  const EstimatorConfig& config() const { return config_; }
  int head_width() const;

  // `depth` is required for VP and ignored for OP.
  EstimatorOutput Forward(const Vec& proprio, const Vec* depth,
                          std::span<const Real> hidden,
                          EstimatorTape* tape = nullptr) const;
  EstimatorOutput Forward(const ProprioBuffer& proprio,
                          const DepthBuffer* depth,
                          std::span<const Real> hidden) const;
  void Backward(const EstimatorTape& tape, const OutputGrad& grad);

  std::vector<TensorParam*> Params();
  void ZeroGrad();
  Vec ZeroHidden() const { return Vec(config_.gru_hidden, 0.0); }

  // Zeroes the last linear layer of the heads.
  void ZeroHeads();

  LayerStack& embed() { return embed_; }
  LayerStack& cnn() { return cnn_; }
  LayerStack& encoder() { return encoder_; }
  LayerStack& gru() { return gru_; }
  LayerStack& heads() { return heads_; }
  const LayerStack& encoder() const { return encoder_; }

  void Save(Checkpoint& ckpt, const std::string& prefix) const;
  void Load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  EstimatorKind kind_;
  EstimatorConfig config_;
  LayerStack embed_, cnn_, encoder_, gru_, heads_;
};

// Encoder over a list of embeddings. For kMlp the embeddings are
// concatenated and compressed by an MLP; for kAttention each embedding is cut
// into token_dim tokens attended by a learned query and then projected.
LayerStack BuildEncoder(EncoderVariant variant, int input_width, int token_dim,
                        int out_width);
Vec EncodeFuse(const LayerStack& encoder, const std::vector<Vec>& embeds);

// Target encoder over (next observation, true velocity).
class HimTarget {
 public:
  HimTarget(const EstimatorConfig& config, std::uint64_t seed);
  Vec Encode(std::span<const Real> next_obs, std::span<const Real> v_true,
             ForwardResult* fwd = nullptr) const;
  void Backward(const ForwardResult& fwd, std::span<const Real> grad_z);
  std::vector<TensorParam*> Params() { return stack_.Params(); }
  LayerStack& stack() { return stack_; }
  const LayerStack& stack() const { return stack_; }

 private:
  LayerStack stack_;
};

// Mean over components of (a - b)^2.
Real Mse(std::span<const Real> a, std::span<const Real> b);

struct LossTerms {
  Real velocity = 0.0;
  Real him = 0.0;
  Real feet = 0.0;
  Real profile = 0.0;
  Real total = 0.0;
  OutputGrad grad;
  Vec z_hat_grad;
};

// Velocity MSE plus latent MSE against the target encoder output.
LossTerms LossOp(const EstimatorOutput& out, const PrivilegedInfo& truth,
                 std::span<const Real> z_hat);
// LossOp terms plus feet clearance and height profile MSE, unit weights.
LossTerms LossVp(const EstimatorOutput& out, const PrivilegedInfo& truth,
                 std::span<const Real> z_hat);

// concat(h_b * mask, h_v * (1 - mask)) for mask in {0, 1}. The inactive half
// is exactly zero and the active half is copied bit for bit.
Vec FuseLatent(std::span<const Real> h_b, std::span<const Real> h_v, int mask);

}  // namespace redest

#endif  // REDEST_ESTIMATORS_H_
