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

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "redest/checkpoint.h"
#include "redest/error.h"
#include "redest/gradcheck.h"
#include "redest/nn.h"
#include "redest/optim.h"

namespace redest {
namespace {

Vec RandomVec(std::mt19937_64& rng, size_t n) {
  std::normal_distribution<Real> d(0.0, 1.0);
  Vec v(n);
  for (Real& x : v) x = d(rng);
  return v;
}

TEST(Forward, ZeroGruWithZeroInputsKeepsZeroHidden) {
  LayerStack s({5});
  s.GruCell(4);
  const Vec x(5, 0.0), h(4, 0.0);
  const ForwardResult r = s.Forward(x, std::span<const Real>(h));
  ASSERT_TRUE(r.new_hidden.has_value());
  for (Real v : *r.new_hidden) EXPECT_EQ(v, 0.0);
  // Gates are exactly one half in this state.
  const Vec& extras = r.tape.extras[0];
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(extras[j], 0.5);
    EXPECT_EQ(extras[4 + j], 0.5);
    EXPECT_EQ(extras[8 + j], 0.0);
  }
}

TEST(Forward, AttentionOverSingleTokenReturnsValueProjection) {
  std::mt19937_64 rng(3);
  LayerStack s({6});
  s.Attention1h(1, 4, 3);
  s.Init(rng);
  const Vec x = RandomVec(rng, 6);
  const Vec y = s.Apply(x);
  const Layer& l = s.layers()[0];
  for (int r = 0; r < 3; ++r) {
    Real expect = l.params[4].values[r];
    for (int c = 0; c < 6; ++c) expect += l.params[3].values[r * 6 + c] * x[c];
    EXPECT_NEAR(y[r], expect, 1e-14);
  }
}

TEST(Forward, IdentityLinearIsIdentity) {
  LayerStack s({4});
  s.Linear(4);
  Vec& w = s.layers()[0].params[0].values;
  for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  const Vec x{0.5, -1.25, 3.0, 0.0};
  EXPECT_EQ(s.Apply(x), x);
}

TEST(Forward, ShapeMismatchNamesBothShapes) {
  LayerStack s({3, 4});
  s.Flatten().Linear(2);
  try {
    s.Apply(Vec(7, 0.0));
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("(3,4)"), std::string::npos) << what;
    EXPECT_NE(what.find("7"), std::string::npos) << what;
  }
}

TEST(Forward, RejectsNonFiniteInput) {
  LayerStack s({2});
  s.Linear(2);
  EXPECT_THROW(s.Apply(Vec{1.0, NAN}), ContractError);
  EXPECT_THROW(s.Apply(Vec{INFINITY, 0.0}), ContractError);
}

TEST(Forward, HiddenPresentIffRecurrent) {
  LayerStack plain({2});
  plain.Linear(2);
  const Vec h(2, 0.0);
  EXPECT_THROW(plain.Forward(Vec(2, 0.0), std::span<const Real>(h)),
               ContractError);
  LayerStack rec({2});
  rec.GruCell(2);
  EXPECT_THROW(rec.Forward(Vec(2, 0.0)), ContractError);
}

TEST(Forward, IsBitwiseDeterministic) {
  std::mt19937_64 rng(11);
  LayerStack s({2, 6, 8});
  s.Conv2d(3, 3, 2, 1).Elu().Flatten().Linear(5).GruCell(4).Tanh();
  s.Init(rng);
  const Vec x = RandomVec(rng, s.input_size());
  const Vec h = RandomVec(rng, 4);
  const ForwardResult a = s.Forward(x, std::span<const Real>(h));
  const ForwardResult b = s.Forward(x, std::span<const Real>(h));
  ASSERT_EQ(a.output.size(), b.output.size());
  EXPECT_EQ(0, std::memcmp(a.output.data(), b.output.data(),
                           a.output.size() * sizeof(Real)));
}

TEST(Forward, GruHiddenStaysInUnitBox) {
  std::mt19937_64 rng(5);
  LayerStack s({3});
  s.GruCell(6);
  s.Init(rng);
  for (TensorParam* p : s.Params()) {
    for (Real& v : p->values) v *= 4.0;
  }
  Vec h(6, 0.0);
  for (int t = 0; t < 200; ++t) {
    Vec x = RandomVec(rng, 3);
    for (Real& v : x) v *= 10.0;
    h = *s.Forward(x, std::span<const Real>(h)).new_hidden;
    for (Real v : h) ASSERT_LE(std::abs(v), 1.0);
  }
}

TEST(Forward, AttentionWeightsFormDistribution) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int tokens = 1 + trial % 6;
    LayerStack s({tokens * 3});
    s.Attention1h(tokens, 4, 2);
    s.Init(rng);
    for (TensorParam* p : s.Params()) {
      for (Real& v : p->values) v *= 3.0;
    }
    const ForwardResult r = s.Forward(RandomVec(rng, tokens * 3));
    Real total = 0.0;
    for (int i = 0; i < tokens; ++i) {
      EXPECT_GE(r.tape.extras[0][i], 0.0);
      total += r.tape.extras[0][i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Backward, ZeroOutputGradGivesZeroGrads) {
  std::mt19937_64 rng(1);
  LayerStack s({2, 6, 8});
  s.Conv2d(3, 3, 2, 1).Elu().Flatten().Linear(6).Tanh().Attention1h(2, 3, 2);
  s.Init(rng);
  const ForwardResult r = s.Forward(RandomVec(rng, s.input_size()));
  const BackwardResult b = s.Backward(r.tape, Vec(s.output_size(), 0.0));
  for (Real v : b.input_grad) EXPECT_EQ(v, 0.0);
  for (const TensorParam* p : s.Params()) {
    for (Real g : p->grad) EXPECT_EQ(g, 0.0);
  }
}

TEST(Backward, LinearGradsAreOuterProducts) {
  std::mt19937_64 rng(2);
  LayerStack s({3});
  s.Linear(2);
  s.Init(rng);
  const Vec x{1.0, -2.0, 0.5};
  const Vec g{0.25, -4.0};
  const ForwardResult r = s.Forward(x);
  s.Backward(r.tape, g);
  const Layer& l = s.layers()[0];
  for (int o = 0; o < 2; ++o) {
    EXPECT_EQ(l.params[1].grad[o], g[o]);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(l.params[0].grad[o * 3 + i], g[o] * x[i]);
  }
}

TEST(Backward, AccumulatesAdditively) {
  std::mt19937_64 rng(4);
  LayerStack s({4});
  s.Linear(3).Elu().Linear(2);
  s.Init(rng);
  const ForwardResult r = s.Forward(RandomVec(rng, 4));
  const Vec g = RandomVec(rng, 2);
  s.Backward(r.tape, g);
  std::vector<Vec> once;
  for (const TensorParam* p : s.Params()) once.push_back(p->grad);
  s.Backward(r.tape, g);
  size_t i = 0;
  for (const TensorParam* p : s.Params()) {
    for (size_t j = 0; j < p->size(); ++j) EXPECT_EQ(p->grad[j], 2.0 * once[i][j]);
    ++i;
  }
}

TEST(Backward, ForwardBackwardLeavesValuesUnchanged) {
  std::mt19937_64 rng(6);
  LayerStack s({6});
  s.Linear(4).Sigmoid().GruCell(3);
  s.Init(rng);
  const LayerStack before = s;
  const Vec h(3, 0.1);
  const ForwardResult r = s.Forward(RandomVec(rng, 6), std::span<const Real>(h));
  s.Backward(r.tape, RandomVec(rng, 3));
  EXPECT_TRUE(SameParameters(before, s));
}

TEST(Backward, RejectsStaleOrForeignTape) {
  std::mt19937_64 rng(7);
  LayerStack s({3});
  s.Linear(2);
  s.Init(rng);
  LayerStack other = s;
  const ForwardResult r = s.Forward(Vec{1.0, 2.0, 3.0});
  EXPECT_THROW(other.Backward(r.tape, Vec{1.0, 1.0}), ContractError);
  s.Backward(r.tape, Vec{1.0, 1.0});
  AdamUpdate(s.Params(), AdamConfig{});
  EXPECT_THROW(s.Backward(r.tape, Vec{1.0, 1.0}), ContractError);
}

TEST(Backward, EveryLayerKindMatchesFiniteDifferences) {
  const auto results = RunLayerGradChecks(20, 1234);
  EXPECT_EQ(results.size(), 10u);
  for (const GradCheckResult& r : results) {
    EXPECT_EQ(r.instances, 20);
    EXPECT_LT(r.worst_error, kGradCheckTolerance) << r.name;
  }
}

TEST(Backward, DeepMixedStackMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  LayerStack s({2, 6, 8});
  s.Conv2d(3, 3, 2, 1).Elu().Conv2d(4, 3, 2, 1).Tanh().Flatten().Linear(8);
  s.Attention1h(4, 3, 5).Sigmoid().GruCell(4).Linear(3);
  EXPECT_LT(StackGradientError(s, rng), kGradCheckTolerance);
}

TEST(Adam, ZeroGradientLeavesValues) {
  TensorParam p({3});
  p.values = {1.0, -2.0, 3.0};
  const Vec before = p.values;
  EXPECT_EQ(AdamUpdate(p, AdamConfig{}), UpdateStatus::kApplied);
  EXPECT_EQ(p.values, before);
  EXPECT_EQ(p.step_count, 1);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstSign) {
  // At t=1 the bias-corrected moments are g and g^2, so the step is
  // lr * g / (|g| + eps).
  for (Real g : {3.0, -0.2, 1e-3}) {
    TensorParam p({1});
    p.values = {0.5};
    p.grad = {g};
    const AdamConfig c{.lr = 0.01};
    AdamUpdate(p, c);
    const Real expected = 0.5 - c.lr * g / (std::abs(g) + c.eps);
    EXPECT_NEAR(p.values[0], expected, 1e-15);
    EXPECT_NEAR(p.values[0], 0.5 - 0.01 * (g > 0 ? 1 : -1), 1e-7);
    EXPECT_EQ(p.grad[0], 0.0);
  }
}

TEST(Adam, ConstantGradientMovesMonotonically) {
  TensorParam p({1});
  p.values = {0.0};
  Real last = 0.0;
  for (int i = 0; i < 2; ++i) {
    p.grad = {-0.7};
    AdamUpdate(p, AdamConfig{.lr = 0.05});
    EXPECT_GT(p.values[0], last);
    last = p.values[0];
  }
}

TEST(Adam, RejectsNonFiniteGradient) {
  TensorParam p({2});
  p.values = {1.0, 2.0};
  p.grad = {0.1, NAN};
  EXPECT_EQ(AdamUpdate(p, AdamConfig{}), UpdateStatus::kRejectedNonFinite);
  EXPECT_EQ(p.values, (Vec{1.0, 2.0}));
  EXPECT_EQ(p.step_count, 0);
  EXPECT_EQ(p.grad, (Vec{0.0, 0.0}));
}

TEST(ConvShape, HalvesWithKernel4Stride2Pad1) {
  EXPECT_EQ(ConvShape({2, 48, 64}, 8, 4, 2, 1), (Shape{8, 24, 32}));
}

TEST(ConvShape, PointwiseKernelPreservesShape) {
  EXPECT_EQ(ConvShape({3, 7, 5}, 3, 1, 1, 0), (Shape{3, 7, 5}));
}

TEST(ConvShape, ThreeStrideTwoLayersGolden) {
  // Kernel 3, stride 2, pad 1: 12 -> 6 -> 3 -> 2 and 16 -> 8 -> 4 -> 2.
  Shape s{2, 12, 16};
  s = ConvShape(s, 8, 3, 2, 1);
  EXPECT_EQ(s, (Shape{8, 6, 8}));
  s = ConvShape(s, 16, 3, 2, 1);
  EXPECT_EQ(s, (Shape{16, 3, 4}));
  s = ConvShape(s, 16, 3, 2, 1);
  EXPECT_EQ(s, (Shape{16, 2, 2}));
  // Paper-shape frames: 48 -> 24 -> 12 -> 6, 64 -> 32 -> 16 -> 8.
  Shape big{2, 48, 64};
  for (int i = 0; i < 3; ++i) big = ConvShape(big, 16, 3, 2, 1);
  EXPECT_EQ(big, (Shape{16, 6, 8}));
}

TEST(ConvShape, DeconvInvertsConv) {
  const Shape in{4, 24, 32};
  const Shape down = ConvShape(in, 8, 4, 2, 1);
  EXPECT_EQ(DeconvShape(down, 4, 4, 2, 1, 0, 0), in);
  const Shape odd{2, 3, 4};
  const Shape d2 = ConvShape(odd, 2, 3, 2, 1);  // (2,2,2)
  EXPECT_EQ(DeconvShape(d2, 2, 3, 2, 1, 0, 1), odd);
}

TEST(ConvShape, CollapsedOutputIsContractError) {
  EXPECT_THROW(ConvShape({1, 2, 2}, 1, 5, 1, 0), ContractError);
  EXPECT_THROW(ConvShape({1, 0, 2}, 1, 1, 1, 0), ContractError);
}

TEST(LayerStack, AdjacentShapesMustAgree) {
  LayerStack s({2, 4, 4});
  EXPECT_THROW(s.Linear(3), ContractError);  // needs Flatten first
  s.Flatten();
  EXPECT_NO_THROW(s.Linear(3));
  EXPECT_THROW(s.Reshape({2, 2}), ContractError);
  EXPECT_THROW(s.GruCell(2).GruCell(2), ContractError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(17);
  LayerStack a({2, 6, 8});
  a.Conv2d(3, 3, 2, 1).Elu().Flatten().Linear(6).GruCell(5);
  a.Init(rng);
  LayerStack b({6});
  b.Attention1h(2, 3, 4).Linear(1);
  b.Init(rng);
  // Include values whose text rendering would not round-trip.
  a.layers()[0].params[1].values[0] = 0.1 + 0.2;
  a.layers()[0].params[1].values[1] = -0.0;
  TensorParam log_std({2});
  log_std.values = {-0.5, std::nextafter(1.0, 2.0)};

  Checkpoint ck;
  ck.SetMeta("beta", "0.0125");
  ck.AddStack("encoder", a);
  ck.AddStack("heads", b);
  ck.AddTensor("log_std", log_std);
  std::stringstream buf;
  ck.Write(buf);
  const std::string bytes = buf.str();

  std::stringstream in(bytes);
  const Checkpoint back = Checkpoint::Read(in);
  EXPECT_TRUE(SameParameters(back.Stack("encoder"), a));
  EXPECT_TRUE(SameParameters(back.Stack("heads"), b));
  EXPECT_EQ(std::signbit(back.Stack("encoder").layers()[0].params[1].values[1]),
            true);
  EXPECT_EQ(0, std::memcmp(back.Tensor("log_std").values.data(),
                           log_std.values.data(), 2 * sizeof(Real)));
  EXPECT_EQ(*back.Meta("beta"), "0.0125");

  std::stringstream again;
  back.Write(again);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, RestoreRejectsLayoutMismatch) {
  LayerStack a({3});
  a.Linear(2);
  Checkpoint ck;
  ck.AddStack("s", a);
  LayerStack wrong({3});
  wrong.Linear(4);
  EXPECT_THROW(ck.RestoreInto("s", wrong), ContractError);
  EXPECT_THROW(ck.Stack("missing"), ContractError);
}

TEST(Checkpoint, RejectsForeignOrFutureFiles) {
  std::stringstream junk("hello\n");
  EXPECT_THROW(Checkpoint::Read(junk), ContractError);
  std::stringstream future("redest-checkpoint\nformat_version 99\nend\n");
  EXPECT_THROW(Checkpoint::Read(future), ContractError);
}

}  // namespace
}  // namespace redest
