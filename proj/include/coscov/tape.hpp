// Copyright 2026 The CosCov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COSCOV_TAPE_H_
#define COSCOV_TAPE_H_

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coscov/errors.hpp"
#include "coscov/kernels.hpp"
#include "coscov/rng.hpp"
#include "coscov/tensor.hpp"

// Reverse-mode differentiation over a linear tape. Ops append nodes in
// execution order; Backward visits them in exact reverse order, so every
// gradient is the sum of its path contributions. Gradients accumulate
// into lazily allocated zero buffers, which makes fan-out correct without
// bookkeeping. One tape records one forward/backward pass and is then
// discarded; it is single-threaded, parallelism lives inside kernels.
//
// Value/Grad references stay valid across later op recordings (node
// storage is a deque), but a tape must not be mutated while another
// thread reads it.

namespace coscov {

using VarId = int64_t;

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarId Leaf(Tensor<T> value, bool requires_grad) {
    return PushNode(std::move(value), requires_grad);
  }

  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

  const Tensor<T>& Value(VarId id) const { return At(id).value; }

  bool RequiresGrad(VarId id) const { return At(id).requires_grad; }

  // Gradient of a node after Backward. Zero tensor if the node received
  // no contributions (e.g. a parameter off the active path).
  const Tensor<T>& Grad(VarId id) {
    Node& n = At(id);
    if (!n.has_grad) AllocGrad(n);
    return n.grad;
  }

  // --- Convolution -------------------------------------------------------

  // input [B,Cin,S] x filters [Cin,Cout,L] -> [B,Cout,S], same-length
  // zero-padded cross-correlation, no bias.
  VarId Conv1d(VarId input, VarId filters) {
    const Tensor<T>& x = Value(input);
    const Tensor<T>& f = Value(filters);
    if (x.rank() != 3 || f.rank() != 3) {
      throw ConfigError("conv1d: input must be [B,Cin,S] and filters [Cin,Cout,L], got " +
                        x.ShapeStr() + " and " + f.ShapeStr());
    }
    if (x.dim(1) != f.dim(0)) {
      throw ConfigError("conv1d: input channels " + std::to_string(x.dim(1)) +
                        " do not match filter Cin " + std::to_string(f.dim(0)));
    }
    if (f.dim(2) < 1 || x.dim(2) < 1) {
      throw ConfigError("conv1d: empty filter or sequence");
    }
    const int64_t b = x.dim(0), cin = x.dim(1), s = x.dim(2);
    const int64_t cout = f.dim(1), flen = f.dim(2);
    Tensor<T> out({b, cout, s});
    kernels::Conv1dForward(x.ptr(), f.ptr(), out.ptr(), b, cin, cout, s, flen);
    DebugCheckFinite(out, "conv1d");
    const bool rg = RequiresGrad(input) || RequiresGrad(filters);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, filters, b, cin, cout, s, flen](Tape& t) {
        const T* g = t.Grad(id).ptr();
        if (t.RequiresGrad(input)) {
          kernels::Conv1dBackwardInput(g, t.Value(filters).ptr(),
                                       t.GradRef(input).ptr(), b, cin, cout, s,
                                       flen);
        }
        if (t.RequiresGrad(filters)) {
          kernels::Conv1dBackwardFilters(g, t.Value(input).ptr(),
                                         t.GradRef(filters).ptr(), b, cin,
                                         cout, s, flen);
        }
      };
    }
    return id;
  }

  // --- Pooling ------------------------------------------------------------

  // Non-overlapping max pool over the last axis; remainder discarded.
  // Backward routes each gradient to the forward argmax (first on ties).
  VarId MaxPool1d(VarId input, int64_t window) {
    const Tensor<T>& x = Value(input);
    if (x.rank() != 3) {
      throw ConfigError("maxpool1d: expected [B,C,S], got " + x.ShapeStr());
    }
    if (window < 1) throw ConfigError("maxpool1d: window must be >= 1");
    const int64_t s = x.dim(2);
    if (window > s) {
      throw ConfigError("maxpool1d: window " + std::to_string(window) +
                        " exceeds sequence length " + std::to_string(s));
    }
    const int64_t rows = x.dim(0) * x.dim(1);
    const int64_t out_len = s / window;
    Tensor<T> out({x.dim(0), x.dim(1), out_len});
    auto argmax = std::make_shared<std::vector<int64_t>>(rows * out_len);
    kernels::MaxPool1dForward(x.ptr(), out.ptr(), argmax->data(), rows, s,
                              window);
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, argmax, rows, s, out_len](Tape& t) {
        kernels::MaxPool1dBackward(t.Grad(id).ptr(), argmax->data(),
                                   t.GradRef(input).ptr(), rows, s, out_len);
      };
    }
    return id;
  }

  // --- Elementwise --------------------------------------------------------

  VarId Tanh(VarId input) {
    const Tensor<T>& x = Value(input);
    Tensor<T> out(x.shape);
    kernels::TanhForward(x.ptr(), out.ptr(), x.numel());
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input](Tape& t) {
        const Tensor<T>& g = t.Grad(id);
        const Tensor<T>& y = t.Value(id);
        T* gin = t.GradRef(input).ptr();
        const int64_t n = g.numel();
        const T* gp = g.ptr();
        const T* yp = y.ptr();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) {
          gin[i] += gp[i] * (T(1) - yp[i] * yp[i]);
        }
      };
    }
    return id;
  }

  VarId Add(VarId a, VarId b) {
    const Tensor<T>& xa = Value(a);
    const Tensor<T>& xb = Value(b);
    if (!xa.SameShape(xb)) {
      throw ConfigError("add: shape mismatch " + xa.ShapeStr() + " vs " +
                        xb.ShapeStr());
    }
    Tensor<T> out(xa.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
      out.data[i] = xa.data[i] + xb.data[i];
    }
    const bool rg = RequiresGrad(a) || RequiresGrad(b);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, a, b](Tape& t) {
        const Tensor<T>& g = t.Grad(id);
        if (t.RequiresGrad(a)) {
          T* ga = t.GradRef(a).ptr();
          for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g.data[i];
        }
        if (t.RequiresGrad(b)) {
          T* gb = t.GradRef(b).ptr();
          for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g.data[i];
        }
      };
    }
    return id;
  }

  VarId Mul(VarId a, VarId b) {
    const Tensor<T>& xa = Value(a);
    const Tensor<T>& xb = Value(b);
    if (!xa.SameShape(xb)) {
      throw ConfigError("mul: shape mismatch " + xa.ShapeStr() + " vs " +
                        xb.ShapeStr());
    }
    Tensor<T> out(xa.shape);
    const int64_t n = out.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out.data[i] = xa.data[i] * xb.data[i];
    const bool rg = RequiresGrad(a) || RequiresGrad(b);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, a, b, n](Tape& t) {
        const T* g = t.Grad(id).ptr();
        if (t.RequiresGrad(a)) {
          T* ga = t.GradRef(a).ptr();
          const T* vb = t.Value(b).ptr();
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
        }
        if (t.RequiresGrad(b)) {
          T* gb = t.GradRef(b).ptr();
          const T* va = t.Value(a).ptr();
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
        }
      };
    }
    return id;
  }

  // --- Dense --------------------------------------------------------------

  // input [B,I] x weights [I,O] + bias [O] -> [B,O]
  VarId Dense(VarId input, VarId weights, VarId bias) {
    const Tensor<T>& x = Value(input);
    const Tensor<T>& w = Value(weights);
    const Tensor<T>& c = Value(bias);
    if (x.rank() != 2 || w.rank() != 2 || c.rank() != 1 ||
        x.dim(1) != w.dim(0) || w.dim(1) != c.dim(0)) {
      throw ConfigError("dense: incompatible shapes " + x.ShapeStr() + ", " +
                        w.ShapeStr() + ", " + c.ShapeStr());
    }
    const int64_t b = x.dim(0), in_dim = x.dim(1), out_dim = w.dim(1);
    Tensor<T> out({b, out_dim});
    kernels::DenseForward(x.ptr(), w.ptr(), c.ptr(), out.ptr(), b, in_dim,
                          out_dim);
    const bool rg =
        RequiresGrad(input) || RequiresGrad(weights) || RequiresGrad(bias);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, weights, bias, b, in_dim, out_dim](Tape& t) {
        const T* g = t.Grad(id).ptr();
        if (t.RequiresGrad(weights)) {
          T* gw = t.GradRef(weights).ptr();
          const T* xv = t.Value(input).ptr();
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < in_dim; ++i) {
            T* gw_row = gw + i * out_dim;
            for (int64_t bb = 0; bb < b; ++bb) {
              const T xi = xv[bb * in_dim + i];
              const T* g_row = g + bb * out_dim;
              for (int64_t o = 0; o < out_dim; ++o) gw_row[o] += xi * g_row[o];
            }
          }
        }
        if (t.RequiresGrad(bias)) {
          T* gc = t.GradRef(bias).ptr();
          for (int64_t bb = 0; bb < b; ++bb) {
            const T* g_row = g + bb * out_dim;
            for (int64_t o = 0; o < out_dim; ++o) gc[o] += g_row[o];
          }
        }
        if (t.RequiresGrad(input)) {
          T* gx = t.GradRef(input).ptr();
          const T* wv = t.Value(weights).ptr();
#pragma omp parallel for schedule(static)
          for (int64_t bb = 0; bb < b; ++bb) {
            const T* g_row = g + bb * out_dim;
            T* gx_row = gx + bb * in_dim;
            for (int64_t i = 0; i < in_dim; ++i) {
              const T* w_row = wv + i * out_dim;
              T acc = T(0);
              for (int64_t o = 0; o < out_dim; ++o) acc += g_row[o] * w_row[o];
              gx_row[i] += acc;
            }
          }
        }
      };
    }
    return id;
  }

  // --- Reductions ---------------------------------------------------------

  // [B,C,S] -> [B,C], mean over the last axis.
  VarId GapTime(VarId input) {
    const Tensor<T>& x = Value(input);
    if (x.rank() != 3) {
      throw ConfigError("gap_time: expected [B,C,S], got " + x.ShapeStr());
    }
    const int64_t b = x.dim(0), c = x.dim(1), s = x.dim(2);
    Tensor<T> out({b, c});
    for (int64_t r = 0; r < b * c; ++r) {
      const T* row = x.ptr() + r * s;
      T acc = T(0);
      for (int64_t n = 0; n < s; ++n) acc += row[n];
      out.data[r] = acc / T(s);
    }
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, b, c, s](Tape& t) {
        const T* g = t.Grad(id).ptr();
        T* gin = t.GradRef(input).ptr();
        const T inv = T(1) / T(s);
        for (int64_t r = 0; r < b * c; ++r) {
          const T gr = g[r] * inv;
          T* gin_row = gin + r * s;
          for (int64_t n = 0; n < s; ++n) gin_row[n] += gr;
        }
      };
    }
    return id;
  }

  // [B,C,S] -> [B,S], mean over the channel axis.
  VarId GapChannels(VarId input) {
    const Tensor<T>& x = Value(input);
    if (x.rank() != 3) {
      throw ConfigError("gap_channels: expected [B,C,S], got " + x.ShapeStr());
    }
    const int64_t b = x.dim(0), c = x.dim(1), s = x.dim(2);
    Tensor<T> out({b, s});
    const T inv = T(1) / T(c);
    for (int64_t bb = 0; bb < b; ++bb) {
      T* out_row = out.ptr() + bb * s;
      for (int64_t n = 0; n < s; ++n) out_row[n] = T(0);
      for (int64_t cc = 0; cc < c; ++cc) {
        const T* row = x.ptr() + (bb * c + cc) * s;
        for (int64_t n = 0; n < s; ++n) out_row[n] += row[n];
      }
      for (int64_t n = 0; n < s; ++n) out_row[n] *= inv;
    }
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, b, c, s, inv](Tape& t) {
        const T* g = t.Grad(id).ptr();
        T* gin = t.GradRef(input).ptr();
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t bb = 0; bb < b; ++bb) {
          for (int64_t cc = 0; cc < c; ++cc) {
            const T* g_row = g + bb * s;
            T* gin_row = gin + (bb * c + cc) * s;
            for (int64_t n = 0; n < s; ++n) gin_row[n] += g_row[n] * inv;
          }
        }
      };
    }
    return id;
  }

  // --- Regularisation -----------------------------------------------------

  // Zeroes whole (b,c) channels with probability p and scales survivors
  // by 1/(1-p). Identity (same VarId, no node) when inactive.
  VarId SpatialDropout1d(VarId input, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
      throw ConfigError("spatial_dropout1d: p must be in [0,1), got " +
                        std::to_string(p));
    }
    if (!training || p == 0.0) return input;
    const Tensor<T>& x = Value(input);
    if (x.rank() != 3) {
      throw ConfigError("spatial_dropout1d: expected [B,C,S], got " +
                        x.ShapeStr());
    }
    const int64_t rows = x.dim(0) * x.dim(1), s = x.dim(2);
    auto scale = std::make_shared<std::vector<T>>(rows);
    const T keep_scale = T(1.0 / (1.0 - p));
    for (int64_t r = 0; r < rows; ++r) {
      (*scale)[r] = rng.Bernoulli(p) ? T(0) : keep_scale;
    }
    Tensor<T> out(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const T m = (*scale)[r];
      const T* in_row = x.ptr() + r * s;
      T* out_row = out.ptr() + r * s;
      for (int64_t n = 0; n < s; ++n) out_row[n] = in_row[n] * m;
    }
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, scale, rows, s](Tape& t) {
        const T* g = t.Grad(id).ptr();
        T* gin = t.GradRef(input).ptr();
        for (int64_t r = 0; r < rows; ++r) {
          const T m = (*scale)[r];
          if (m == T(0)) continue;
          const T* g_row = g + r * s;
          T* gin_row = gin + r * s;
          for (int64_t n = 0; n < s; ++n) gin_row[n] += g_row[n] * m;
        }
      };
    }
    return id;
  }

  // --- Loss ---------------------------------------------------------------

  // Mean over the batch of -log softmax(logits)[label]. Gradient is
  // (softmax - onehot)/B.
  VarId SoftmaxCrossEntropy(VarId logits, const std::vector<int64_t>& labels) {
    const Tensor<T>& x = Value(logits);
    if (x.rank() != 2 || x.dim(1) < 2) {
      throw ConfigError("softmax_cross_entropy: logits must be [B,Z], Z >= 2, got " +
                        x.ShapeStr());
    }
    const int64_t b = x.dim(0), z = x.dim(1);
    if (static_cast<int64_t>(labels.size()) != b) {
      throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                      " labels for batch " + std::to_string(b));
    }
    auto probs = std::make_shared<Tensor<T>>(std::vector<int64_t>{b, z});
    auto labels_copy = std::make_shared<std::vector<int64_t>>(labels);
    T loss = T(0);
    for (int64_t bb = 0; bb < b; ++bb) {
      const int64_t label = labels[bb];
      if (label < 0 || label >= z) {
        throw DataError("softmax_cross_entropy: label " + std::to_string(label) +
                        " out of range [0," + std::to_string(z) + ")");
      }
      const T* row = x.ptr() + bb * z;
      T m = row[0];
      for (int64_t k = 1; k < z; ++k) m = std::max(m, row[k]);
      T denom = T(0);
      for (int64_t k = 0; k < z; ++k) denom += std::exp(row[k] - m);
      T* p_row = probs->ptr() + bb * z;
      for (int64_t k = 0; k < z; ++k) p_row[k] = std::exp(row[k] - m) / denom;
      loss += std::log(denom) - (row[label] - m);
    }
    loss /= T(b);
    Tensor<T> out({1});
    out.data[0] = loss;
    DebugCheckFinite(out, "softmax_cross_entropy");
    const bool rg = RequiresGrad(logits);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, logits, probs, labels_copy, b, z](Tape& t) {
        const T g0 = t.Grad(id).data[0];
        T* gx = t.GradRef(logits).ptr();
        const T inv_b = T(1) / T(b);
        for (int64_t bb = 0; bb < b; ++bb) {
          const T* p_row = probs->ptr() + bb * z;
          T* g_row = gx + bb * z;
          const int64_t label = (*labels_copy)[bb];
          for (int64_t k = 0; k < z; ++k) {
            const T onehot = (k == label) ? T(1) : T(0);
            g_row[k] += g0 * (p_row[k] - onehot) * inv_b;
          }
        }
      };
    }
    return id;
  }

  // --- Cosine filter generation -------------------------------------------

  // filters[ci,co,n] = theta1[ci,co] * cos(theta2[ci,co] * n), n in 0..L-1.
  VarId CosFilters(VarId theta1, VarId theta2, int64_t flen) {
    const Tensor<T>& t1 = Value(theta1);
    const Tensor<T>& t2 = Value(theta2);
    if (!t1.SameShape(t2) || t1.rank() != 2) {
      throw ConfigError("cos_filters: theta1/theta2 must be equal-shape [Cin,Cout], got " +
                        t1.ShapeStr() + " and " + t2.ShapeStr());
    }
    if (flen < 1) throw ConfigError("cos_filters: filter length must be >= 1");
    const int64_t pairs = t1.numel();
    Tensor<T> out({t1.dim(0), t1.dim(1), flen});
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < pairs; ++p) {
      const T a = t1.data[p];
      const T w = t2.data[p];
      T* row = out.ptr() + p * flen;
      for (int64_t n = 0; n < flen; ++n) {
        row[n] = a * std::cos(w * T(n));
      }
    }
    DebugCheckFinite(out, "cos_filters");
    const bool rg = RequiresGrad(theta1) || RequiresGrad(theta2);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, theta1, theta2, pairs, flen](Tape& t) {
        const T* g = t.Grad(id).ptr();
        const T* a = t.Value(theta1).ptr();
        const T* w = t.Value(theta2).ptr();
        const bool need1 = t.RequiresGrad(theta1);
        const bool need2 = t.RequiresGrad(theta2);
        T* g1 = need1 ? t.GradRef(theta1).ptr() : nullptr;
        T* g2 = need2 ? t.GradRef(theta2).ptr() : nullptr;
#pragma omp parallel for schedule(static)
        for (int64_t p = 0; p < pairs; ++p) {
          const T* g_row = g + p * flen;
          T acc1 = T(0), acc2 = T(0);
          for (int64_t n = 0; n < flen; ++n) {
            const T arg = w[p] * T(n);
            acc1 += g_row[n] * std::cos(arg);
            acc2 += g_row[n] * (-a[p] * T(n) * std::sin(arg));
          }
          if (need1) g1[p] += acc1;
          if (need2) g2[p] += acc2;
        }
      };
    }
    return id;
  }

  // --- Shape plumbing -----------------------------------------------------

  VarId Reshape(VarId input, std::vector<int64_t> new_shape) {
    const Tensor<T>& x = Value(input);
    Tensor<T> out(new_shape);
    if (out.numel() != x.numel()) {
      throw ConfigError("reshape: numel mismatch " + x.ShapeStr() + " -> " +
                        out.ShapeStr());
    }
    out.data = x.data;
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input](Tape& t) {
        const Tensor<T>& g = t.Grad(id);
        T* gin = t.GradRef(input).ptr();
        for (int64_t i = 0; i < g.numel(); ++i) gin[i] += g.data[i];
      };
    }
    return id;
  }

  // [1,M] -> [B,M]; backward sums over the broadcast axis.
  VarId BroadcastRows(VarId input, int64_t b) {
    const Tensor<T>& x = Value(input);
    if (x.rank() != 2 || x.dim(0) != 1) {
      throw ConfigError("broadcast_rows: expected [1,M], got " + x.ShapeStr());
    }
    if (b < 1) throw ConfigError("broadcast_rows: batch must be >= 1");
    const int64_t m = x.dim(1);
    Tensor<T> out({b, m});
    for (int64_t bb = 0; bb < b; ++bb) {
      for (int64_t i = 0; i < m; ++i) out.data[bb * m + i] = x.data[i];
    }
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, b, m](Tape& t) {
        const T* g = t.Grad(id).ptr();
        T* gin = t.GradRef(input).ptr();
        for (int64_t bb = 0; bb < b; ++bb) {
          const T* g_row = g + bb * m;
          for (int64_t i = 0; i < m; ++i) gin[i] += g_row[i];
        }
      };
    }
    return id;
  }

  // --- Vector quantisation ------------------------------------------------

  // Forward value is the quantised tensor; backward copies the gradient
  // to the pre-quantisation features unchanged. The codebook gets no
  // gradient through this path.
  VarId VqStraightThrough(VarId features, const Tensor<T>& quantised) {
    const Tensor<T>& f = Value(features);
    if (!f.SameShape(quantised)) {
      throw ConfigError("vq_straight_through: shape mismatch " + f.ShapeStr() +
                        " vs " + quantised.ShapeStr());
    }
    Tensor<T> out = quantised;
    const bool rg = RequiresGrad(features);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, features](Tape& t) {
        const Tensor<T>& g = t.Grad(id);
        T* gf = t.GradRef(features).ptr();
        for (int64_t i = 0; i < g.numel(); ++i) gf[i] += g.data[i];
      };
    }
    return id;
  }

  // mean over rows i of ||sg[F_i] - E_{j(i)}||^2 (norm summed over d).
  // Only the codebook receives gradient; features enter as plain values.
  VarId VqCodebookLoss(VarId codebook, const Tensor<T>& features,
                       const std::vector<int64_t>& indices) {
    const Tensor<T>& e = Value(codebook);
    if (e.rank() != 2) {
      throw ConfigError("vq_codebook_loss: codebook must be [k,d], got " +
                        e.ShapeStr());
    }
    const int64_t d = e.dim(1);
    const int64_t rows = features.numel() / d;
    if (rows * d != features.numel() ||
        rows != static_cast<int64_t>(indices.size())) {
      throw ConfigError("vq_codebook_loss: features/indices do not factor into rows of length d");
    }
    auto features_copy = std::make_shared<Tensor<T>>(features);
    auto indices_copy = std::make_shared<std::vector<int64_t>>(indices);
    T loss = T(0);
    for (int64_t r = 0; r < rows; ++r) {
      const T* f_row = features.ptr() + r * d;
      const T* e_row = e.ptr() + indices[r] * d;
      for (int64_t t = 0; t < d; ++t) {
        const T diff = f_row[t] - e_row[t];
        loss += diff * diff;
      }
    }
    loss /= T(rows);
    Tensor<T> out({1});
    out.data[0] = loss;
    const bool rg = RequiresGrad(codebook);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, codebook, features_copy, indices_copy, rows,
                         d](Tape& t) {
        const T g0 = t.Grad(id).data[0];
        T* ge = t.GradRef(codebook).ptr();
        const Tensor<T>& e = t.Value(codebook);
        const T scale = g0 * T(2) / T(rows);
        for (int64_t r = 0; r < rows; ++r) {
          const T* f_row = features_copy->ptr() + r * d;
          T* ge_row = ge + (*indices_copy)[r] * d;
          const T* e_row = e.ptr() + (*indices_copy)[r] * d;
          for (int64_t tt = 0; tt < d; ++tt) {
            ge_row[tt] += scale * (e_row[tt] - f_row[tt]);
          }
        }
      };
    }
    return id;
  }

  // beta * mean over rows i of ||F_i - sg[E_{j(i)}]||^2. Only the encoder
  // features receive gradient; the quantised values enter as constants.
  VarId VqCommitmentLoss(VarId features, const Tensor<T>& quantised, T beta,
                         int64_t d) {
    const Tensor<T>& f = Value(features);
    if (!f.SameShape(quantised)) {
      throw ConfigError("vq_commitment_loss: shape mismatch " + f.ShapeStr() +
                        " vs " + quantised.ShapeStr());
    }
    const int64_t rows = f.numel() / d;
    if (rows * d != f.numel()) {
      throw ConfigError("vq_commitment_loss: features do not factor into rows of length d");
    }
    auto quantised_copy = std::make_shared<Tensor<T>>(quantised);
    T loss = T(0);
    for (int64_t i = 0; i < f.numel(); ++i) {
      const T diff = f.data[i] - quantised.data[i];
      loss += diff * diff;
    }
    loss = beta * loss / T(rows);
    Tensor<T> out({1});
    out.data[0] = loss;
    const bool rg = RequiresGrad(features);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, features, quantised_copy, beta, rows](Tape& t) {
        const T g0 = t.Grad(id).data[0];
        const Tensor<T>& f = t.Value(features);
        T* gf = t.GradRef(features).ptr();
        const T scale = g0 * beta * T(2) / T(rows);
        for (int64_t i = 0; i < f.numel(); ++i) {
          gf[i] += scale * (f.data[i] - quantised_copy->data[i]);
        }
      };
    }
    return id;
  }

  // --- Scalar projection (gradient-check objectives) ----------------------

  // sum(x * w) with fixed weights; reduces any tensor to a scalar.
  VarId WeightedSum(VarId input, const Tensor<T>& w) {
    const Tensor<T>& x = Value(input);
    if (!x.SameShape(w)) {
      throw ConfigError("weighted_sum: shape mismatch " + x.ShapeStr() + " vs " +
                        w.ShapeStr());
    }
    auto w_copy = std::make_shared<Tensor<T>>(w);
    T acc = T(0);
    for (int64_t i = 0; i < x.numel(); ++i) acc += x.data[i] * w.data[i];
    Tensor<T> out({1});
    out.data[0] = acc;
    const bool rg = RequiresGrad(input);
    const VarId id = PushNode(std::move(out), rg);
    if (rg) {
      At(id).backward = [id, input, w_copy](Tape& t) {
        const T g0 = t.Grad(id).data[0];
        T* gin = t.GradRef(input).ptr();
        for (int64_t i = 0; i < w_copy->numel(); ++i) {
          gin[i] += g0 * w_copy->data[i];
        }
      };
    }
    return id;
  }

  // --- Backward -----------------------------------------------------------

  // Seeds d(root)/d(root) = 1 and replays the tape in reverse execution
  // order. root must be scalar.
  void Backward(VarId root) {
    if (Value(root).numel() != 1) {
      throw ConfigError("backward: root must be scalar, got " +
                        Value(root).ShapeStr());
    }
    GradRef(root).data[0] = T(1);
    for (VarId i = root; i >= 0; --i) {
      Node& n = At(i);
      if (n.has_grad && n.backward) n.backward(*this);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Tape&)> backward;
  };

  Node& At(VarId id) {
    if (id < 0 || id >= size()) {
      throw ConfigError("tape: invalid VarId " + std::to_string(id));
    }
    return nodes_[static_cast<size_t>(id)];
  }
  const Node& At(VarId id) const {
    return const_cast<Tape*>(this)->At(id);
  }

  VarId PushNode(Tensor<T> value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  void AllocGrad(Node& n) {
    n.grad = Tensor<T>(n.value.shape);
    n.has_grad = true;
  }

  // Mutable gradient buffer, zero-allocated on first touch.
  Tensor<T>& GradRef(VarId id) {
    Node& n = At(id);
    if (!n.has_grad) AllocGrad(n);
    return n.grad;
  }

  std::deque<Node> nodes_;
};

}  // namespace coscov

#endif  // COSCOV_TAPE_H_
