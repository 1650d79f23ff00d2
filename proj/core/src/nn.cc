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

#include "redest/nn.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "redest/error.h"

namespace redest {
namespace {

std::atomic<std::uint64_t> next_stack_id{1};

void CheckFinite(std::span<const Real> x, const char* what) {
  for (Real v : x) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string("non-finite value in ") + what);
    }
  }
}

// y = W x + b, W is (out, in) row-major.
void LinearForward(const Layer& l, const Vec& x, Vec& y) {
  const int in = l.desc.attrs[0], out = l.desc.attrs[1];
  const Vec& w = l.params[0].values;
  const Vec& b = l.params[1].values;
  y.assign(out, 0.0);
  for (int o = 0; o < out; ++o) {
    const Real* row = &w[static_cast<size_t>(o) * in];
    Real acc = b[o];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void LinearBackward(Layer& l, const Vec& x, std::span<const Real> gy, Vec& gx) {
  const int in = l.desc.attrs[0], out = l.desc.attrs[1];
  const Vec& w = l.params[0].values;
  Vec& gw = l.params[0].grad;
  Vec& gb = l.params[1].grad;
  gx.assign(in, 0.0);
  for (int o = 0; o < out; ++o) {
    const Real g = gy[o];
    if (g == 0.0) continue;
    gb[o] += g;
    const Real* row = &w[static_cast<size_t>(o) * in];
    Real* grow = &gw[static_cast<size_t>(o) * in];
    for (int i = 0; i < in; ++i) {
      grow[i] += g * x[i];
      gx[i] += g * row[i];
    }
  }
}

struct ConvGeom {
  int cin, h, w, cout, k, s, p, oh, ow;
};

ConvGeom Geom(const Layer& l) {
  const auto& a = l.desc.attrs;
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], l.out_shape[1],
          l.out_shape[2]};
}

// Weight layout (cout, cin, k, k).
void ConvForward(const Layer& l, const Vec& x, Vec& y) {
  const ConvGeom g = Geom(l);
  const Vec& w = l.params[0].values;
  const Vec& b = l.params[1].values;
  y.assign(static_cast<size_t>(g.cout) * g.oh * g.ow, 0.0);
  for (int co = 0; co < g.cout; ++co) {
    for (int oy = 0; oy < g.oh; ++oy) {
      for (int ox = 0; ox < g.ow; ++ox) {
        Real acc = b[co];
        for (int ci = 0; ci < g.cin; ++ci) {
          for (int ky = 0; ky < g.k; ++ky) {
            const int iy = oy * g.s - g.p + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ix = ox * g.s - g.p + kx;
              if (ix < 0 || ix >= g.w) continue;
              acc += w[((co * g.cin + ci) * g.k + ky) * g.k + kx] *
                     x[(ci * g.h + iy) * g.w + ix];
            }
          }
        }
        y[(co * g.oh + oy) * g.ow + ox] = acc;
      }
    }
  }
}

void ConvBackward(Layer& l, const Vec& x, std::span<const Real> gy, Vec& gx) {
  const ConvGeom g = Geom(l);
  const Vec& w = l.params[0].values;
  Vec& gw = l.params[0].grad;
  Vec& gb = l.params[1].grad;
  gx.assign(x.size(), 0.0);
  for (int co = 0; co < g.cout; ++co) {
    for (int oy = 0; oy < g.oh; ++oy) {
      for (int ox = 0; ox < g.ow; ++ox) {
        const Real go = gy[(co * g.oh + oy) * g.ow + ox];
        if (go == 0.0) continue;
        gb[co] += go;
        for (int ci = 0; ci < g.cin; ++ci) {
          for (int ky = 0; ky < g.k; ++ky) {
            const int iy = oy * g.s - g.p + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ix = ox * g.s - g.p + kx;
              if (ix < 0 || ix >= g.w) continue;
              const size_t wi = ((co * g.cin + ci) * g.k + ky) * g.k + kx;
              const size_t xi = (ci * g.h + iy) * g.w + ix;
              gw[wi] += go * x[xi];
              gx[xi] += go * w[wi];
            }
          }
        }
      }
    }
  }
}

// Transposed convolution, weight layout (cin, cout, k, k): every input pixel
// scatters a k x k patch into the output.
void DeconvForward(const Layer& l, const Vec& x, Vec& y) {
  const ConvGeom g = Geom(l);
  const Vec& w = l.params[0].values;
  const Vec& b = l.params[1].values;
  y.assign(static_cast<size_t>(g.cout) * g.oh * g.ow, 0.0);
  for (int co = 0; co < g.cout; ++co) {
    std::fill(y.begin() + static_cast<size_t>(co) * g.oh * g.ow,
              y.begin() + static_cast<size_t>(co + 1) * g.oh * g.ow, b[co]);
  }
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int iy = 0; iy < g.h; ++iy) {
      for (int ix = 0; ix < g.w; ++ix) {
        const Real v = x[(ci * g.h + iy) * g.w + ix];
        for (int co = 0; co < g.cout; ++co) {
          for (int ky = 0; ky < g.k; ++ky) {
            const int oy = iy * g.s - g.p + ky;
            if (oy < 0 || oy >= g.oh) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ox = ix * g.s - g.p + kx;
              if (ox < 0 || ox >= g.ow) continue;
              y[(co * g.oh + oy) * g.ow + ox] +=
                  v * w[((ci * g.cout + co) * g.k + ky) * g.k + kx];
            }
          }
        }
      }
    }
  }
}

void DeconvBackward(Layer& l, const Vec& x, std::span<const Real> gy,
                    Vec& gx) {
  const ConvGeom g = Geom(l);
  const Vec& w = l.params[0].values;
  Vec& gw = l.params[0].grad;
  Vec& gb = l.params[1].grad;
  gx.assign(x.size(), 0.0);
  for (int co = 0; co < g.cout; ++co) {
    for (int i = 0; i < g.oh * g.ow; ++i) {
      gb[co] += gy[static_cast<size_t>(co) * g.oh * g.ow + i];
    }
  }
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int iy = 0; iy < g.h; ++iy) {
      for (int ix = 0; ix < g.w; ++ix) {
        const size_t xi = (ci * g.h + iy) * g.w + ix;
        const Real v = x[xi];
        Real acc = 0.0;
        for (int co = 0; co < g.cout; ++co) {
          for (int ky = 0; ky < g.k; ++ky) {
            const int oy = iy * g.s - g.p + ky;
            if (oy < 0 || oy >= g.oh) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ox = ix * g.s - g.p + kx;
              if (ox < 0 || ox >= g.ow) continue;
              const size_t wi = ((ci * g.cout + co) * g.k + ky) * g.k + kx;
              const Real go = gy[(co * g.oh + oy) * g.ow + ox];
              gw[wi] += v * go;
              acc += w[wi] * go;
            }
          }
        }
        gx[xi] = acc;
      }
    }
  }
}

// PyTorch gate convention, gate order (r, z, n):
//   r = s(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = s(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
// extras layout: [r | z | n | Wh_n h + bh_n].
void GruForward(const Layer& l, const Vec& x, const Vec& h, Vec& h_out,
                Vec& extras) {
  const int in = l.desc.attrs[0], hs = l.desc.attrs[1];
  const Vec& wx = l.params[0].values;
  const Vec& wh = l.params[1].values;
  const Vec& bx = l.params[2].values;
  const Vec& bh = l.params[3].values;
  Vec ax(3 * hs), ah(3 * hs);
  for (int j = 0; j < 3 * hs; ++j) {
    Real acc = bx[j];
    const Real* row = &wx[static_cast<size_t>(j) * in];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    ax[j] = acc;
    Real acch = bh[j];
    const Real* rowh = &wh[static_cast<size_t>(j) * hs];
    for (int i = 0; i < hs; ++i) acch += rowh[i] * h[i];
    ah[j] = acch;
  }
  extras.assign(4 * hs, 0.0);
  h_out.assign(hs, 0.0);
  for (int j = 0; j < hs; ++j) {
    const Real r = Sigmoid(ax[j] + ah[j]);
    const Real z = Sigmoid(ax[hs + j] + ah[hs + j]);
    const Real hn = ah[2 * hs + j];
    const Real n = std::tanh(ax[2 * hs + j] + r * hn);
    extras[j] = r;
    extras[hs + j] = z;
    extras[2 * hs + j] = n;
    extras[3 * hs + j] = hn;
    h_out[j] = (1.0 - z) * n + z * h[j];
  }
}

void GruBackward(Layer& l, const Vec& x, const Vec& h, const Vec& extras,
                 std::span<const Real> gy, Vec& gx, Vec& gh) {
  const int in = l.desc.attrs[0], hs = l.desc.attrs[1];
  const Vec& wx = l.params[0].values;
  const Vec& wh = l.params[1].values;
  Vec& gwx = l.params[0].grad;
  Vec& gwh = l.params[1].grad;
  Vec& gbx = l.params[2].grad;
  Vec& gbh = l.params[3].grad;
  // Gradients w.r.t. the pre-activations of the x and h affine maps.
  Vec dax(3 * hs), dah(3 * hs);
  gh.assign(hs, 0.0);
  for (int j = 0; j < hs; ++j) {
    const Real r = extras[j], z = extras[hs + j], n = extras[2 * hs + j];
    const Real hn = extras[3 * hs + j];
    const Real g = gy[j];
    const Real dn = g * (1.0 - z);
    const Real dz = g * (h[j] - n);
    gh[j] += g * z;
    const Real dn_pre = dn * (1.0 - n * n);
    const Real dr = dn_pre * hn;
    const Real dr_pre = dr * r * (1.0 - r);
    const Real dz_pre = dz * z * (1.0 - z);
    dax[j] = dr_pre;
    dah[j] = dr_pre;
    dax[hs + j] = dz_pre;
    dah[hs + j] = dz_pre;
    dax[2 * hs + j] = dn_pre;
    dah[2 * hs + j] = dn_pre * r;
  }
  gx.assign(in, 0.0);
  for (int j = 0; j < 3 * hs; ++j) {
    gbx[j] += dax[j];
    gbh[j] += dah[j];
    const Real* row = &wx[static_cast<size_t>(j) * in];
    Real* grow = &gwx[static_cast<size_t>(j) * in];
    for (int i = 0; i < in; ++i) {
      grow[i] += dax[j] * x[i];
      gx[i] += dax[j] * row[i];
    }
    const Real* rowh = &wh[static_cast<size_t>(j) * hs];
    Real* growh = &gwh[static_cast<size_t>(j) * hs];
    for (int i = 0; i < hs; ++i) {
      growh[i] += dah[j] * h[i];
      gh[i] += dah[j] * rowh[i];
    }
  }
}

// Single-head attention with a learned query:
//   k_i = Wk x_i + bk, v_i = Wv x_i + bv,
//   a = softmax(q . k_i / sqrt(dk)), y = sum_i a_i v_i.
// extras layout: [a (tokens) | k (tokens*dk) | v (tokens*dv)].
void AttentionForward(const Layer& l, const Vec& x, Vec& y, Vec& extras) {
  const int t = l.desc.attrs[0], d = l.desc.attrs[1], dk = l.desc.attrs[2],
            dv = l.desc.attrs[3];
  const Vec& q = l.params[0].values;
  const Vec& wk = l.params[1].values;
  const Vec& bk = l.params[2].values;
  const Vec& wv = l.params[3].values;
  const Vec& bv = l.params[4].values;
  extras.assign(t + t * dk + t * dv, 0.0);
  Real* a = &extras[0];
  Real* k = &extras[t];
  Real* v = &extras[t + t * dk];
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(dk));
  Real max_score = -INFINITY;
  for (int i = 0; i < t; ++i) {
    const Real* xi = &x[static_cast<size_t>(i) * d];
    Real score = 0.0;
    for (int r = 0; r < dk; ++r) {
      Real acc = bk[r];
      for (int c = 0; c < d; ++c) acc += wk[r * d + c] * xi[c];
      k[i * dk + r] = acc;
      score += q[r] * acc;
    }
    for (int r = 0; r < dv; ++r) {
      Real acc = bv[r];
      for (int c = 0; c < d; ++c) acc += wv[r * d + c] * xi[c];
      v[i * dv + r] = acc;
    }
    a[i] = score * scale;
    max_score = std::max(max_score, a[i]);
  }
  Real total = 0.0;
  for (int i = 0; i < t; ++i) {
    a[i] = std::exp(a[i] - max_score);
    total += a[i];
  }
  for (int i = 0; i < t; ++i) a[i] /= total;
  y.assign(dv, 0.0);
  for (int i = 0; i < t; ++i) {
    for (int r = 0; r < dv; ++r) y[r] += a[i] * v[i * dv + r];
  }
}

void AttentionBackward(Layer& l, const Vec& x, const Vec& extras,
                       std::span<const Real> gy, Vec& gx) {
  const int t = l.desc.attrs[0], d = l.desc.attrs[1], dk = l.desc.attrs[2],
            dv = l.desc.attrs[3];
  const Vec& q = l.params[0].values;
  const Vec& wk = l.params[1].values;
  const Vec& wv = l.params[3].values;
  Vec& gq = l.params[0].grad;
  Vec& gwk = l.params[1].grad;
  Vec& gbk = l.params[2].grad;
  Vec& gwv = l.params[3].grad;
  Vec& gbv = l.params[4].grad;
  const Real* a = &extras[0];
  const Real* k = &extras[t];
  const Real* v = &extras[t + t * dk];
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(dk));

  Vec da(t, 0.0);
  Real weighted = 0.0;
  for (int i = 0; i < t; ++i) {
    for (int r = 0; r < dv; ++r) da[i] += gy[r] * v[i * dv + r];
    weighted += a[i] * da[i];
  }
  gx.assign(static_cast<size_t>(t) * d, 0.0);
  for (int i = 0; i < t; ++i) {
    const Real ds = a[i] * (da[i] - weighted) * scale;
    const Real* xi = &x[static_cast<size_t>(i) * d];
    Real* gxi = &gx[static_cast<size_t>(i) * d];
    for (int r = 0; r < dk; ++r) {
      gq[r] += ds * k[i * dk + r];
      const Real dkr = ds * q[r];
      gbk[r] += dkr;
      for (int c = 0; c < d; ++c) {
        gwk[r * d + c] += dkr * xi[c];
        gxi[c] += dkr * wk[r * d + c];
      }
    }
    for (int r = 0; r < dv; ++r) {
      const Real dvr = a[i] * gy[r];
      gbv[r] += dvr;
      for (int c = 0; c < d; ++c) {
        gwv[r * d + c] += dvr * xi[c];
        gxi[c] += dvr * wv[r * d + c];
      }
    }
  }
}

}  // namespace

int ShapeSize(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>());
}

Real Elu(Real x) { return x > 0.0 ? x : std::expm1(x); }

Real Sigmoid(Real x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

TensorParam::TensorParam(Shape s)
    : shape(std::move(s)),
      values(ShapeSize(shape), 0.0),
      grad(values.size(), 0.0),
      moment1(values.size(), 0.0),
      moment2(values.size(), 0.0) {}

void TensorParam::ZeroGrad() { std::fill(grad.begin(), grad.end(), 0.0); }

const char* LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kElu: return "elu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDeconv2d: return "deconv2d";
    case LayerKind::kGruCell: return "gru_cell";
    case LayerKind::kAttention1h: return "attention_1h";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kReshape: return "reshape";
  }
  return "?";
}

LayerKind LayerKindFromName(const std::string& name) {
  for (LayerKind k :
       {LayerKind::kLinear, LayerKind::kElu, LayerKind::kTanh,
        LayerKind::kSigmoid, LayerKind::kConv2d, LayerKind::kDeconv2d,
        LayerKind::kGruCell, LayerKind::kAttention1h, LayerKind::kFlatten,
        LayerKind::kReshape}) {
    if (name == LayerKindName(k)) return k;
  }
  throw ContractError("unknown layer kind '" + name + "'");
}

Shape ConvShape(const Shape& in, int out_channels, int kernel, int stride,
                int padding) {
  Require(in.size() == 3 && in[0] > 0 && in[1] > 0 && in[2] > 0,
          "conv input must be positive (C,H,W), got " + ShapeString(in));
  Require(out_channels > 0 && kernel > 0 && stride > 0 && padding >= 0,
          "conv parameters must be positive");
  const int oh = (in[1] + 2 * padding - kernel) / stride + 1;
  const int ow = (in[2] + 2 * padding - kernel) / stride + 1;
  if (in[1] + 2 * padding < kernel || in[2] + 2 * padding < kernel || oh < 1 ||
      ow < 1) {
    throw ContractError("conv output collapses for input " + ShapeString(in) +
                        " kernel " + std::to_string(kernel));
  }
  return {out_channels, oh, ow};
}

Shape DeconvShape(const Shape& in, int out_channels, int kernel, int stride,
                  int padding, int out_pad_h, int out_pad_w) {
  Require(in.size() == 3 && in[0] > 0 && in[1] > 0 && in[2] > 0,
          "deconv input must be positive (C,H,W), got " + ShapeString(in));
  Require(out_channels > 0 && kernel > 0 && stride > 0 && padding >= 0,
          "deconv parameters must be positive");
  Require(out_pad_h >= 0 && out_pad_h < stride && out_pad_w >= 0 &&
              out_pad_w < stride,
          "deconv output padding must be in [0, stride)");
  const int oh = (in[1] - 1) * stride - 2 * padding + kernel + out_pad_h;
  const int ow = (in[2] - 1) * stride - 2 * padding + kernel + out_pad_w;
  Require(oh >= 1 && ow >= 1, "deconv output collapses for input " +
                                  ShapeString(in));
  return {out_channels, oh, ow};
}

LayerStack::LayerStack() : id_(next_stack_id++) {}

LayerStack::LayerStack(Shape input_shape)
    : input_shape_(std::move(input_shape)), id_(next_stack_id++) {
  Require(!input_shape_.empty() && ShapeSize(input_shape_) > 0,
          "stack input shape must be non-empty");
}

LayerStack::LayerStack(const LayerStack& other)
    : input_shape_(other.input_shape_),
      layers_(other.layers_),
      gru_index_(other.gru_index_),
      id_(next_stack_id++) {}

LayerStack& LayerStack::operator=(const LayerStack& other) {
  if (this != &other) {
    input_shape_ = other.input_shape_;
    layers_ = other.layers_;
    gru_index_ = other.gru_index_;
    id_ = next_stack_id++;
  }
  return *this;
}

const Shape& LayerStack::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().out_shape;
}

int LayerStack::hidden_size() const {
  return gru_index_ < 0 ? 0 : layers_[gru_index_].desc.attrs[1];
}

void LayerStack::Push(Layer layer) { layers_.push_back(std::move(layer)); }

LayerStack& LayerStack::Linear(int out) {
  return Append({LayerKind::kLinear, {ShapeSize(output_shape()), out}});
}
LayerStack& LayerStack::Elu() {
  return Append({LayerKind::kElu, output_shape()});
}
LayerStack& LayerStack::Tanh() {
  return Append({LayerKind::kTanh, output_shape()});
}
LayerStack& LayerStack::Sigmoid() {
  return Append({LayerKind::kSigmoid, output_shape()});
}
LayerStack& LayerStack::Conv2d(int out_channels, int kernel, int stride,
                               int padding) {
  const Shape& s = output_shape();
  Require(s.size() == 3, "conv2d needs (C,H,W) input, got " + ShapeString(s));
  return Append({LayerKind::kConv2d,
                 {s[0], s[1], s[2], out_channels, kernel, stride, padding}});
}
LayerStack& LayerStack::Deconv2d(int out_channels, int kernel, int stride,
                                 int padding, int out_pad_h, int out_pad_w) {
  const Shape& s = output_shape();
  Require(s.size() == 3,
          "deconv2d needs (C,H,W) input, got " + ShapeString(s));
  return Append({LayerKind::kDeconv2d,
                 {s[0], s[1], s[2], out_channels, kernel, stride, padding,
                  out_pad_h, out_pad_w}});
}
LayerStack& LayerStack::GruCell(int hidden) {
  return Append({LayerKind::kGruCell, {ShapeSize(output_shape()), hidden}});
}
LayerStack& LayerStack::Attention1h(int tokens, int key_dim, int value_dim) {
  const int n = ShapeSize(output_shape());
  Require(tokens > 0 && n % tokens == 0,
          "attention input of size " + std::to_string(n) +
              " cannot be split into " + std::to_string(tokens) + " tokens");
  return Append(
      {LayerKind::kAttention1h, {tokens, n / tokens, key_dim, value_dim}});
}
LayerStack& LayerStack::Flatten() {
  return Append({LayerKind::kFlatten, {ShapeSize(output_shape())}});
}
LayerStack& LayerStack::Reshape(Shape shape) {
  return Append({LayerKind::kReshape, std::move(shape)});
}

LayerStack& LayerStack::Append(const LayerDesc& desc) {
  const Shape& cur = output_shape();
  const int cur_size = ShapeSize(cur);
  const auto& a = desc.attrs;
  Layer l;
  l.desc = desc;
  l.in_shape = cur;
  auto arity = [&](size_t n) {
    Require(a.size() == n, std::string(LayerKindName(desc.kind)) +
                               " expects " + std::to_string(n) +
                               " attributes");
  };
  switch (desc.kind) {
    case LayerKind::kLinear:
      arity(2);
      Require(cur.size() == 1 && cur[0] == a[0],
              "linear expects 1-D input of width " + std::to_string(a[0]) +
                  ", got " + ShapeString(cur));
      Require(a[1] > 0, "linear width must be positive");
      l.out_shape = {a[1]};
      l.params.emplace_back(Shape{a[1], a[0]});
      l.params.emplace_back(Shape{a[1]});
      break;
    case LayerKind::kElu:
    case LayerKind::kTanh:
    case LayerKind::kSigmoid:
      Require(a == cur, std::string(LayerKindName(desc.kind)) +
                            " shape " + ShapeString(a) +
                            " does not match input " + ShapeString(cur));
      l.out_shape = cur;
      break;
    case LayerKind::kConv2d: {
      arity(7);
      const Shape in{a[0], a[1], a[2]};
      Require(in == cur, "conv2d expects input " + ShapeString(in) +
                             ", got " + ShapeString(cur));
      l.out_shape = ConvShape(in, a[3], a[4], a[5], a[6]);
      l.params.emplace_back(Shape{a[3], a[0], a[4], a[4]});
      l.params.emplace_back(Shape{a[3]});
      break;
    }
    case LayerKind::kDeconv2d: {
      arity(9);
      const Shape in{a[0], a[1], a[2]};
      Require(in == cur, "deconv2d expects input " + ShapeString(in) +
                             ", got " + ShapeString(cur));
      l.out_shape = DeconvShape(in, a[3], a[4], a[5], a[6], a[7], a[8]);
      l.params.emplace_back(Shape{a[0], a[3], a[4], a[4]});
      l.params.emplace_back(Shape{a[3]});
      break;
    }
    case LayerKind::kGruCell:
      arity(2);
      Require(gru_index_ < 0, "a stack holds at most one gru_cell");
      Require(cur.size() == 1 && cur[0] == a[0],
              "gru_cell expects 1-D input of width " + std::to_string(a[0]) +
                  ", got " + ShapeString(cur));
      Require(a[1] > 0, "gru hidden width must be positive");
      l.out_shape = {a[1]};
      l.params.emplace_back(Shape{3 * a[1], a[0]});
      l.params.emplace_back(Shape{3 * a[1], a[1]});
      l.params.emplace_back(Shape{3 * a[1]});
      l.params.emplace_back(Shape{3 * a[1]});
      gru_index_ = static_cast<int>(layers_.size());
      break;
    case LayerKind::kAttention1h:
      arity(4);
      Require(a[0] * a[1] == cur_size,
              "attention expects " + std::to_string(a[0] * a[1]) +
                  " inputs, got " + ShapeString(cur));
      Require(a[2] > 0 && a[3] > 0, "attention widths must be positive");
      l.out_shape = {a[3]};
      l.params.emplace_back(Shape{a[2]});
      l.params.emplace_back(Shape{a[2], a[1]});
      l.params.emplace_back(Shape{a[2]});
      l.params.emplace_back(Shape{a[3], a[1]});
      l.params.emplace_back(Shape{a[3]});
      break;
    case LayerKind::kFlatten:
      arity(1);
      Require(a[0] == cur_size, "flatten size mismatch");
      l.out_shape = {cur_size};
      break;
    case LayerKind::kReshape:
      Require(ShapeSize(a) == cur_size,
              "cannot reshape " + ShapeString(cur) + " to " + ShapeString(a));
      l.out_shape = a;
      break;
  }
  Push(std::move(l));
  return *this;
}

void LayerStack::Init(std::mt19937_64& rng) {
  for (Layer& l : layers_) {
    const auto& a = l.desc.attrs;
    auto fill = [&rng](TensorParam& p, Real bound) {
      std::uniform_real_distribution<Real> u(-bound, bound);
      for (Real& v : p.values) v = u(rng);
    };
    switch (l.desc.kind) {
      case LayerKind::kLinear:
        fill(l.params[0], std::sqrt(3.0 / a[0]));
        break;
      case LayerKind::kConv2d:
        fill(l.params[0], std::sqrt(3.0 / (a[0] * a[4] * a[4])));
        break;
      case LayerKind::kDeconv2d: {
        // Each output pixel sees about cin * (k / s)^2 contributions.
        const Real fan = a[0] * std::max(1.0, Real(a[4] * a[4]) / (a[5] * a[5]));
        fill(l.params[0], std::sqrt(3.0 / fan));
        break;
      }
      case LayerKind::kGruCell:
        fill(l.params[0], 1.0 / std::sqrt(Real(a[1])));
        fill(l.params[1], 1.0 / std::sqrt(Real(a[1])));
        break;
      case LayerKind::kAttention1h:
        fill(l.params[0], std::sqrt(3.0 / a[2]));
        fill(l.params[1], std::sqrt(3.0 / a[1]));
        fill(l.params[3], std::sqrt(3.0 / a[1]));
        break;
      default:
        break;
    }
  }
}

void LayerStack::ScaleLastLinear(Real factor) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    if (it->desc.kind == LayerKind::kLinear) {
      for (Real& v : it->params[0].values) v *= factor;
      return;
    }
  }
}

ForwardResult LayerStack::Forward(
    std::span<const Real> input,
    std::optional<std::span<const Real>> hidden) const {
  if (static_cast<int>(input.size()) != input_size()) {
    throw ContractError("input shape mismatch: stack expects " +
                        ShapeString(input_shape_) + " (" +
                        std::to_string(input_size()) + " values), got " +
                        std::to_string(input.size()) + " values");
  }
  CheckFinite(input, "stack input");
  if (recurrent() != hidden.has_value()) {
    throw ContractError(recurrent() ? "recurrent stack requires a hidden state"
                                    : "hidden state given to a stack without "
                                      "gru_cell");
  }
  ForwardResult res;
  Tape& tape = res.tape;
  tape.stack_id = id_;
  tape.generation = generation();
  if (hidden) {
    Require(static_cast<int>(hidden->size()) == hidden_size(),
            "hidden size mismatch: expects " + std::to_string(hidden_size()) +
                ", got " + std::to_string(hidden->size()));
    CheckFinite(*hidden, "hidden state");
    tape.hidden_in.assign(hidden->begin(), hidden->end());
  }
  tape.inputs.resize(layers_.size());
  tape.extras.resize(layers_.size());
  Vec cur(input.begin(), input.end());
  Vec next;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    switch (l.desc.kind) {
      case LayerKind::kLinear:
        LinearForward(l, cur, next);
        break;
      case LayerKind::kElu:
        next.resize(cur.size());
        for (size_t j = 0; j < cur.size(); ++j) next[j] = redest::Elu(cur[j]);
        break;
      case LayerKind::kTanh:
        next.resize(cur.size());
        for (size_t j = 0; j < cur.size(); ++j) next[j] = std::tanh(cur[j]);
        break;
      case LayerKind::kSigmoid:
        next.resize(cur.size());
        for (size_t j = 0; j < cur.size(); ++j) next[j] = redest::Sigmoid(cur[j]);
        break;
      case LayerKind::kConv2d:
        ConvForward(l, cur, next);
        break;
      case LayerKind::kDeconv2d:
        DeconvForward(l, cur, next);
        break;
      case LayerKind::kGruCell:
        GruForward(l, cur, tape.hidden_in, next, tape.extras[i]);
        res.new_hidden = next;
        break;
      case LayerKind::kAttention1h:
        AttentionForward(l, cur, next, tape.extras[i]);
        break;
      case LayerKind::kFlatten:
      case LayerKind::kReshape:
        next = cur;
        break;
    }
    tape.inputs[i] = std::move(cur);
    cur = std::move(next);
    next = Vec();
  }
  CheckFinite(cur, "stack output");
  res.output = std::move(cur);
  return res;
}

Vec LayerStack::Apply(std::span<const Real> input) const {
  return Forward(input).output;
}

BackwardResult LayerStack::Backward(const Tape& tape,
                                    std::span<const Real> output_grad) {
  if (tape.stack_id != id_) {
    throw ContractError("tape was produced by a different stack");
  }
  if (tape.generation != generation()) {
    throw ContractError("stale tape: parameters changed since forward");
  }
  if (tape.inputs.size() != layers_.size()) {
    throw ContractError("tape does not match stack depth");
  }
  Require(static_cast<int>(output_grad.size()) == output_size(),
          "output grad size mismatch: expects " +
              std::to_string(output_size()) + ", got " +
              std::to_string(output_grad.size()));
  BackwardResult res;
  Vec g(output_grad.begin(), output_grad.end());
  Vec gin;
  for (size_t ii = layers_.size(); ii-- > 0;) {
    Layer& l = layers_[ii];
    const Vec& x = tape.inputs[ii];
    switch (l.desc.kind) {
      case LayerKind::kLinear:
        LinearBackward(l, x, g, gin);
        break;
      case LayerKind::kElu:
        gin.resize(g.size());
        for (size_t j = 0; j < g.size(); ++j) {
          gin[j] = x[j] > 0.0 ? g[j] : g[j] * std::exp(x[j]);
        }
        break;
      case LayerKind::kTanh:
        gin.resize(g.size());
        for (size_t j = 0; j < g.size(); ++j) {
          const Real t = std::tanh(x[j]);
          gin[j] = g[j] * (1.0 - t * t);
        }
        break;
      case LayerKind::kSigmoid:
        gin.resize(g.size());
        for (size_t j = 0; j < g.size(); ++j) {
          const Real s = redest::Sigmoid(x[j]);
          gin[j] = g[j] * s * (1.0 - s);
        }
        break;
      case LayerKind::kConv2d:
        ConvBackward(l, x, g, gin);
        break;
      case LayerKind::kDeconv2d:
        DeconvBackward(l, x, g, gin);
        break;
      case LayerKind::kGruCell: {
        Vec gh;
        GruBackward(l, x, tape.hidden_in, tape.extras[ii], g, gin, gh);
        res.hidden_grad = std::move(gh);
        break;
      }
      case LayerKind::kAttention1h:
        AttentionBackward(l, x, tape.extras[ii], g, gin);
        break;
      case LayerKind::kFlatten:
      case LayerKind::kReshape:
        gin = g;
        break;
    }
    g = std::move(gin);
    gin = Vec();
  }
  res.input_grad = std::move(g);
  return res;
}

std::vector<TensorParam*> LayerStack::Params() {
  std::vector<TensorParam*> out;
  for (Layer& l : layers_) {
    for (TensorParam& p : l.params) out.push_back(&p);
  }
  return out;
}

std::vector<const TensorParam*> LayerStack::Params() const {
  std::vector<const TensorParam*> out;
  for (const Layer& l : layers_) {
    for (const TensorParam& p : l.params) out.push_back(&p);
  }
  return out;
}

size_t LayerStack::ParamCount() const {
  size_t n = 0;
  for (const TensorParam* p : Params()) n += p->size();
  return n;
}

void LayerStack::ZeroGrad() {
  for (TensorParam* p : Params()) p->ZeroGrad();
}

std::int64_t LayerStack::generation() const {
  std::int64_t g = 0;
  for (const Layer& l : layers_) {
    for (const TensorParam& p : l.params) g += p.step_count;
  }
  return g;
}

}  // namespace redest
