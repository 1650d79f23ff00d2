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

// Dense network primitives with hand-written reverse-mode gradients.
//
// Every activation is a flat array of Real; shapes are contracts checked when
// a stack is assembled, not runtime metadata carried by the data. A stack is a
// straight pipeline; composite networks (estimators, autoencoder, policy) are
// built from several named stacks.

#ifndef REDEST_NN_H_
#define REDEST_NN_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace redest {

using Real = double;
using Vec = std::vector<Real>;
using Shape = std::vector<int>;

int ShapeSize(const Shape& shape);

// Trainable tensor with its gradient buffer and adaptive-moment state.
struct TensorParam {
  TensorParam() = default;
  explicit TensorParam(Shape shape);

  size_t size() const { return values.size(); }
  void ZeroGrad();

  Shape shape;
  Vec values;
  Vec grad;
  Vec moment1;
  Vec moment2;
  std::int64_t step_count = 0;
};

enum class LayerKind {
  kLinear,
  kElu,
  kTanh,
  kSigmoid,
  kConv2d,
  kDeconv2d,
  kGruCell,
  kAttention1h,
  kFlatten,
  kReshape,
};

const char* LayerKindName(LayerKind kind);
LayerKind LayerKindFromName(const std::string& name);

// Serializable layer description. Attribute layout per kind:
//   linear      [in, out]
//   conv2d      [cin, h, w, cout, kernel, stride, pad]
//   deconv2d    [cin, h, w, cout, kernel, stride, pad, out_pad_h, out_pad_w]
//   gru_cell    [in, hidden]
//   attention   [tokens, token_dim, key_dim, value_dim]
//   others      the output shape
struct LayerDesc {
  LayerKind kind;
  std::vector<int> attrs;
};

struct Layer {
  LayerDesc desc;
  Shape in_shape;
  Shape out_shape;
  std::vector<TensorParam> params;
};

// Spatial output of a strided convolution: floor((n + 2p - k) / s) + 1.
// Throws ContractError when any output dimension would be < 1.
Shape ConvShape(const Shape& input_chw, int out_channels, int kernel,
                int stride, int padding);
// Transposed convolution: (n - 1) * s - 2p + k + out_pad.
Shape DeconvShape(const Shape& input_chw, int out_channels, int kernel,
                  int stride, int padding, int out_pad_h, int out_pad_w);

// Activation record of one forward pass. Only valid for the stack (and
// parameter generation) that produced it.
struct Tape {
  std::uint64_t stack_id = 0;
  std::int64_t generation = -1;
  std::vector<Vec> inputs;  // input of each layer
  std::vector<Vec> extras;  // per-layer scratch (gates, attention weights)
  Vec hidden_in;
};

struct ForwardResult {
  Vec output;
  std::optional<Vec> new_hidden;
  Tape tape;
};

struct BackwardResult {
  Vec input_grad;
  std::optional<Vec> hidden_grad;
};

class LayerStack {
 public:
  LayerStack();
  explicit LayerStack(Shape input_shape);
  LayerStack(const LayerStack& other);
  LayerStack& operator=(const LayerStack& other);
  LayerStack(LayerStack&&) noexcept = default;
  LayerStack& operator=(LayerStack&&) noexcept = default;

  // Builders. Each appends a layer whose input is the current output shape.
  LayerStack& Linear(int out);
  LayerStack& Elu();
  LayerStack& Tanh();
  LayerStack& Sigmoid();
  LayerStack& Conv2d(int out_channels, int kernel, int stride, int padding);
  LayerStack& Deconv2d(int out_channels, int kernel, int stride, int padding,
                       int out_pad_h = 0, int out_pad_w = 0);
  LayerStack& GruCell(int hidden);
  // Input must hold `tokens` tokens; the token width is inferred.
  LayerStack& Attention1h(int tokens, int key_dim, int value_dim);
  LayerStack& Flatten();
  LayerStack& Reshape(Shape shape);

  // Appends a layer from its serialized description (checkpoint loading).
  LayerStack& Append(const LayerDesc& desc);

  // Fan-in scaled uniform weights, zero biases.
  void Init(std::mt19937_64& rng);
  void ScaleLastLinear(Real factor);

  ForwardResult Forward(std::span<const Real> input,
                        std::optional<std::span<const Real>> hidden = {}) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. the input
  // (and the incoming hidden state for recurrent stacks).
  BackwardResult Backward(const Tape& tape, std::span<const Real> output_grad);

  // Convenience for inference: output only.
  Vec Apply(std::span<const Real> input) const;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  int input_size() const { return ShapeSize(input_shape_); }
  int output_size() const { return ShapeSize(output_shape()); }
  bool recurrent() const { return gru_index_ >= 0; }
  int hidden_size() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<TensorParam*> Params();
  std::vector<const TensorParam*> Params() const;
  size_t ParamCount() const;
  void ZeroGrad();

  // Sum of optimizer step counts; changes whenever any parameter is updated.
  std::int64_t generation() const;
  std::uint64_t id() const { return id_; }

 private:
  void Push(Layer layer);

  Shape input_shape_;
  std::vector<Layer> layers_;
  int gru_index_ = -1;
  std::uint64_t id_;
};

Real Elu(Real x);
Real Sigmoid(Real x);

}  // namespace redest

#endif  // REDEST_NN_H_
