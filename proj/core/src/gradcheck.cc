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

#include "redest/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace redest {
namespace {

Vec Gaussian(std::mt19937_64& rng, size_t n, Real scale = 1.0) {
  std::normal_distribution<Real> d(0.0, scale);
  Vec v(n);
  for (Real& x : v) x = d(rng);
  return v;
}

int Uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

LayerStack RandomStack(LayerKind kind, std::mt19937_64& rng) {
  switch (kind) {
    case LayerKind::kLinear: {
      LayerStack s({Uniform(rng, 1, 8)});
      s.Linear(Uniform(rng, 1, 8));
      return s;
    }
    case LayerKind::kElu: {
      LayerStack s({Uniform(rng, 1, 8)});
      return std::move(s.Elu());
    }
    case LayerKind::kTanh: {
      LayerStack s({Uniform(rng, 1, 8)});
      return std::move(s.Tanh());
    }
    case LayerKind::kSigmoid: {
      LayerStack s({Uniform(rng, 1, 8)});
      return std::move(s.Sigmoid());
    }
    case LayerKind::kConv2d: {
      const int k = Uniform(rng, 1, 3), st = Uniform(rng, 1, 2),
                p = Uniform(rng, 0, std::min(1, k - 1));
      LayerStack s({Uniform(rng, 1, 3), Uniform(rng, k, 8), Uniform(rng, k, 8)});
      s.Conv2d(Uniform(rng, 1, 4), k, st, p);
      return s;
    }
    case LayerKind::kDeconv2d: {
      const int k = Uniform(rng, 1, 3), st = Uniform(rng, 1, 2),
                p = Uniform(rng, 0, (k - 1) / 2);
      LayerStack s({Uniform(rng, 1, 3), Uniform(rng, 1, 4), Uniform(rng, 1, 4)});
      s.Deconv2d(Uniform(rng, 1, 3), k, st, p, Uniform(rng, 0, st - 1),
                 Uniform(rng, 0, st - 1));
      return s;
    }
    case LayerKind::kGruCell: {
      LayerStack s({Uniform(rng, 1, 6)});
      s.GruCell(Uniform(rng, 1, 6));
      return s;
    }
    case LayerKind::kAttention1h: {
      const int t = Uniform(rng, 1, 5), d = Uniform(rng, 1, 6);
      LayerStack s({t * d});
      s.Attention1h(t, Uniform(rng, 1, 6), Uniform(rng, 1, 6));
      return s;
    }
    case LayerKind::kFlatten: {
      LayerStack s({Uniform(rng, 1, 3), Uniform(rng, 1, 4), Uniform(rng, 1, 4)});
      s.Flatten().Linear(Uniform(rng, 1, 4));
      return s;
    }
    case LayerKind::kReshape: {
      const int a = Uniform(rng, 1, 4), b = Uniform(rng, 1, 4);
      LayerStack s({a * b});
      s.Reshape({1, a, b}).Conv2d(2, 1, 1, 0);
      return s;
    }
  }
  return LayerStack({1});
}

}  // namespace

Real RelativeError(std::span<const Real> a, std::span<const Real> n) {
  Real diff = 0.0, na = 0.0, nn = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) /
         std::max({std::sqrt(na), std::sqrt(nn), static_cast<Real>(1e-6)});
}

Real FiniteDifferenceError(const std::function<Real()>& loss,
                           std::vector<GradBlock>& blocks, Real eps,
                           std::string* worst_block) {
  Real worst = 0.0;
  for (GradBlock& b : blocks) {
    Vec numeric(b.size);
    for (size_t i = 0; i < b.size; ++i) {
      const Real saved = b.values[i];
      b.values[i] = saved + eps;
      const Real up = loss();
      b.values[i] = saved - eps;
      const Real down = loss();
      b.values[i] = saved;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    const Real err = RelativeError(b.analytic, numeric);
    if (err > worst || !std::isfinite(err)) {
      worst = err;
      if (worst_block) *worst_block = b.name;
    }
  }
  return worst;
}

Real StackGradientError(LayerStack& stack, std::mt19937_64& rng, Real eps) {
  for (TensorParam* p : stack.Params()) p->values = Gaussian(rng, p->size(), 0.5);
  Vec input = Gaussian(rng, stack.input_size());
  Vec hidden;
  if (stack.recurrent()) {
    hidden = Gaussian(rng, stack.hidden_size(), 0.5);
    for (Real& h : hidden) h = std::tanh(h);
  }
  const Vec proj = Gaussian(rng, stack.output_size());

  auto run = [&]() {
    return stack.recurrent() ? stack.Forward(input, std::span<const Real>(hidden))
                             : stack.Forward(input);
  };
  auto loss = [&]() {
    const Vec y = run().output;
    Real l = 0.0;
    for (size_t i = 0; i < y.size(); ++i) l += proj[i] * y[i];
    return l;
  };

  stack.ZeroGrad();
  const ForwardResult fwd = run();
  const BackwardResult bwd = stack.Backward(fwd.tape, proj);

  std::vector<GradBlock> blocks;
  blocks.push_back({"input", input.data(), input.size(), bwd.input_grad});
  if (stack.recurrent()) {
    blocks.push_back({"hidden", hidden.data(), hidden.size(), *bwd.hidden_grad});
  }
  int index = 0;
  for (TensorParam* p : stack.Params()) {
    blocks.push_back({"param" + std::to_string(index++), p->values.data(),
                      p->size(), p->grad});
  }
  const Real err = FiniteDifferenceError(loss, blocks, eps);
  stack.ZeroGrad();
  return err;
}

std::vector<GradCheckResult> RunLayerGradChecks(int instances,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  for (LayerKind kind :
       {LayerKind::kLinear, LayerKind::kElu, LayerKind::kTanh,
        LayerKind::kSigmoid, LayerKind::kConv2d, LayerKind::kDeconv2d,
        LayerKind::kGruCell, LayerKind::kAttention1h, LayerKind::kFlatten,
        LayerKind::kReshape}) {
    GradCheckResult r;
    r.name = LayerKindName(kind);
    for (int i = 0; i < instances; ++i) {
      LayerStack s = RandomStack(kind, rng);
      r.worst_error = std::max(r.worst_error, StackGradientError(s, rng));
      ++r.instances;
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace redest
