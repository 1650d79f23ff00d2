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

#include "redest/selector.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "json.hpp"
#include "redest/error.h"
#include "redest/estimators.h"

namespace redest {

Autoencoder::Autoencoder(const AutoencoderConfig& config, std::uint64_t seed)
    : config_(config), net_(config.input) {
  Require(config.input.size() == 3, "autoencoder input must be (C,H,W)");
  Require(!config.channels.empty(), "autoencoder needs conv layers");
  std::vector<Shape> shapes{config.input};
  for (int ch : config.channels) {
    net_.Conv2d(ch, 3, 2, 1).Elu();
    shapes.push_back(net_.output_shape());
  }
  const Shape code_shape = net_.output_shape();
  const int flat = ShapeSize(code_shape);
  Require(config.bottleneck < ShapeSize(config.input),
          "bottleneck must be narrower than the input");
  net_.Flatten().Linear(config.bottleneck).Elu().Linear(flat).Elu();
  net_.Reshape(code_shape);
  // Mirror the encoder, padding outputs so each deconv lands on the shape
  // its conv consumed.
  for (int i = static_cast<int>(config.channels.size()) - 1; i >= 0; --i) {
    const Shape& cur = net_.output_shape();
    const Shape& target = shapes[i];
    const int oph = target[1] - ((cur[1] - 1) * 2 - 2 + 3);
    const int opw = target[2] - ((cur[2] - 1) * 2 - 2 + 3);
    net_.Deconv2d(target[0], 3, 2, 1, oph, opw);
    if (i > 0) net_.Elu();
  }
  Require(net_.output_shape() == config.input,
          "autoencoder does not reproduce its input shape");
  std::mt19937_64 rng(seed);
  net_.Init(rng);
}

namespace {

Vec Centered(std::span<const Real> frames) {
  Vec x(frames.begin(), frames.end());
  for (Real& v : x) v -= kAutoencoderInputCenter;
  return x;
}

}  // namespace

Vec Autoencoder::Reconstruct(std::span<const Real> frames) const {
  Vec y = net_.Apply(Centered(frames));
  for (Real& v : y) v += kAutoencoderInputCenter;
  return y;
}

Real Autoencoder::AccumulateGradient(std::span<const Real> frames,
                                     Vec* frames_grad) {
  const ForwardResult fwd = net_.Forward(Centered(frames));
  Vec y = fwd.output;
  for (Real& v : y) v += kAutoencoderInputCenter;
  Vec g(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    g[i] = 2.0 * (y[i] - frames[i]) / y.size();
  }
  const BackwardResult back = net_.Backward(fwd.tape, g);
  if (frames_grad != nullptr) {
    *frames_grad = back.input_grad;
    for (size_t i = 0; i < g.size(); ++i) (*frames_grad)[i] -= g[i];
  }
  return LossAd(frames, y);
}

Real LossAd(std::span<const Real> frames, std::span<const Real> recon) {
  return Mse(frames, recon);
}

Real CalibrateBeta(const std::vector<Real>& clean_losses) {
  Require(!clean_losses.empty(), "beta calibration needs at least one loss");
  for (Real l : clean_losses) Require(std::isfinite(l), "non-finite loss");
  return *std::max_element(clean_losses.begin(), clean_losses.end());
}

BetaCalibration CalibrateBeta(const std::vector<Real>& clean_losses,
                              int episodes, std::uint64_t seed) {
  BetaCalibration c;
  c.beta = CalibrateBeta(clean_losses);
  c.episodes = episodes;
  c.seed = seed;
  c.samples = static_cast<int>(clean_losses.size());
  return c;
}

std::string BetaConfigText(const BetaCalibration& cal) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "beta = " << cal.beta << "\n";
  os << "beta_episodes = " << cal.episodes << "\n";
  os << "beta_seed = " << cal.seed << "\n";
  os << "beta_samples = " << cal.samples << "\n";
  return os.str();
}

const char* ModeName(Mode mode) { return mode == Mode::kVp ? "VP" : "OP"; }

SelectorState MakeSelector(Real beta, Real gamma) {
  Require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  SelectorState s;
  s.beta = beta;
  s.gamma = gamma;
  return s;
}

SelectorState FilterUpdate(const SelectorState& state, Real loss_ad,
                           int step) {
  SelectorState s = state;
  const Real p_hat = loss_ad < s.beta ? 1.0 : 0.0;
  s.P = std::clamp((1.0 - s.gamma) * s.P + s.gamma * p_hat, 0.0, 1.0);
  const Mode mode = s.P > 0.5 ? Mode::kVp : Mode::kOp;
  s.switched = mode != s.mode;
  if (s.switched) {
    s.mode = mode;
    ++s.switch_count;
    s.last_switch_step = step;
  }
  s.loss_history.push_back(loss_ad);
  while (static_cast<int>(s.loss_history.size()) > s.history_limit) {
    s.loss_history.pop_front();
  }
  return s;
}

int SelectorMask(const SelectorState& state) {
  return state.mode == Mode::kOp ? 1 : 0;
}

Vec SelectLatent(const SelectorState& state, std::span<const Real> h_b,
                 std::span<const Real> h_v) {
  return FuseLatent(h_b, h_v, SelectorMask(state));
}

int PredictedFlipTicks(Real gamma) {
  Require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  int n = 1;
  Real p = 1.0 - gamma;
  while (p > 0.5) {
    p *= 1.0 - gamma;
    ++n;
  }
  return n;
}

std::string TraceTickJson(int step, Real loss_ad, const SelectorState& s) {
  nlohmann::json j;
  j["schema"] = kTraceSchemaVersion;
  j["kind"] = "tick";
  j["step"] = step;
  j["loss_ad"] = loss_ad;
  j["beta"] = s.beta;
  j["P"] = s.P;
  j["mode"] = ModeName(s.mode);
  j["switched"] = s.switched;
  return j.dump();
}

}  // namespace redest
