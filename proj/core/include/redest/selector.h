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

// Visual anomaly detector and estimator selector. A convolutional
// autoencoder reconstructs two consecutive depth frames; its reconstruction
// error is thresholded against beta and low-pass filtered into the
// probability P of trusting vision.

#ifndef REDEST_SELECTOR_H_
#define REDEST_SELECTOR_H_

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "redest/checkpoint.h"
#include "redest/nn.h"

namespace redest {

struct AutoencoderConfig {
  Shape input{2, 12, 16};
  std::vector<int> channels{8, 16, 32};
  int bottleneck = 64;
};

// Depths enter the network shifted by half the sensor range, so a frame of
// uniform near-floor readings is far from the origin rather than at it. The
// reconstruction is shifted back, leaving the MSE in meters.
inline constexpr Real kAutoencoderInputCenter = 1.0;

class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

  const AutoencoderConfig& config() const { return config_; }
  int input_size() const { return net_.input_size(); }
  int bottleneck() const { return config_.bottleneck; }

  Vec Reconstruct(std::span<const Real> frames) const;
  // Reconstruction loss of `frames`; accumulates parameter gradients. When
  // `frames_grad` is given it receives d loss / d frames, counting the frames
  // both as input and as target.
  Real AccumulateGradient(std::span<const Real> frames,
                          Vec* frames_grad = nullptr);

  LayerStack& net() { return net_; }
  const LayerStack& net() const { return net_; }
  std::vector<TensorParam*> Params() { return net_.Params(); }

 private:
  AutoencoderConfig config_;
  LayerStack net_;
};

// Mean squared error over every pixel of both frames.
Real LossAd(std::span<const Real> frames, std::span<const Real> recon);

struct BetaCalibration {
  Real beta = 0.0;
  int episodes = 0;
  std::uint64_t seed = 0;
  int samples = 0;
};

// Maximum of the clean losses.
Real CalibrateBeta(const std::vector<Real>& clean_losses);
BetaCalibration CalibrateBeta(const std::vector<Real>& clean_losses,
                              int episodes, std::uint64_t seed);
// Key-value lines: beta, beta_episodes, beta_seed, beta_samples.
std::string BetaConfigText(const BetaCalibration& cal);

enum class Mode { kVp, kOp };
const char* ModeName(Mode mode);

struct SelectorState {
  Real P = 1.0;
  Real beta = 0.0;
  Real gamma = 0.1;
  Mode mode = Mode::kVp;
  std::deque<Real> loss_history;
  int history_limit = 64;
  int switch_count = 0;
  int last_switch_step = -1;
  bool switched = false;  // on the most recent update
};

SelectorState MakeSelector(Real beta, Real gamma = 0.1);

// P_hat = [loss < beta]; P <- (1 - gamma) P + gamma P_hat; VP iff P > 0.5.
SelectorState FilterUpdate(const SelectorState& state, Real loss_ad,
                           int step = -1);

// Mask 1 (proprioception only) in OP mode, 0 in VP mode.
int SelectorMask(const SelectorState& state);
Vec SelectLatent(const SelectorState& state, std::span<const Real> h_b,
                 std::span<const Real> h_v);

// Number of consecutive opposing updates needed to flip out of a saturated
// state, i.e. the smallest n with (1 - gamma)^n <= 0.5.
int PredictedFlipTicks(Real gamma);

inline constexpr int kTraceSchemaVersion = 1;
// {"schema":..,"kind":"tick","step":..,"loss_ad":..,"beta":..,"P":..,
//  "mode":..,"switched":..}
std::string TraceTickJson(int step, Real loss_ad, const SelectorState& state);

}  // namespace redest

#endif  // REDEST_SELECTOR_H_
