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

#ifndef COSCOV_COS_LAYERS_H_
#define COSCOV_COS_LAYERS_H_

#include <cmath>
#include <cstdint>
#include <ostream>

#include "coscov/rng.hpp"
#include "coscov/tape.hpp"
#include "coscov/tensor.hpp"

// Cosine convolutional layers. A filter of length L is generated from two
// scalars as g[n] = theta1 * cos(theta2 * n), n = 0..L-1 (left-anchored),
// so a layer holds 2*Cin*Cout parameters regardless of L where a plain
// convolution holds Cin*Cout*L. theta1 is the amplitude, theta2 the
// angular step per sample; filters are regenerated from theta on every
// forward pass so the gradient path back to the parameters stays exact.

namespace coscov {

inline constexpr double kPi = 3.14159265358979323846;

// Tape-resident bank: theta tensors already registered as variables.
struct CosBankVars {
  VarId theta1 = -1;  // [Cin,Cout]
  VarId theta2 = -1;  // [Cin,Cout]
  int64_t filter_len = 0;
};

// theta1 ~ U(-1,1); theta2 ~ U(0,pi) so the per-sample phase step spans
// DC to Nyquist at init.
template <typename T>
inline void InitCosBankParams(Tensor<T>& theta1, Tensor<T>& theta2, Rng& rng) {
  for (int64_t i = 0; i < theta1.numel(); ++i) {
    theta1.data[i] = static_cast<T>(rng.Uniform(-1.0, 1.0));
  }
  for (int64_t i = 0; i < theta2.numel(); ++i) {
    theta2.data[i] = static_cast<T>(rng.Uniform(0.0, kPi));
  }
}

// Filter values without a tape, for export and inspection.
template <typename T>
inline Tensor<T> GenerateFilterValues(const Tensor<T>& theta1,
                                      const Tensor<T>& theta2, int64_t flen) {
  Tensor<T> out({theta1.dim(0), theta1.dim(1), flen});
  for (int64_t p = 0; p < theta1.numel(); ++p) {
    T* row = out.ptr() + p * flen;
    for (int64_t n = 0; n < flen; ++n) {
      row[n] = theta1.data[p] * std::cos(theta2.data[p] * T(n));
    }
  }
  return out;
}

template <typename T>
inline VarId GenerateFilters(Tape<T>& tape, const CosBankVars& bank) {
  return tape.CosFilters(bank.theta1, bank.theta2, bank.filter_len);
}

// One hidden block: generate -> conv -> tanh -> maxpool -> dropout.
template <typename T>
inline VarId CosCovLayerForward(Tape<T>& tape, VarId input,
                                const CosBankVars& bank, int64_t pool_window,
                                double dropout_p, bool training, Rng& rng) {
  const VarId filters = GenerateFilters(tape, bank);
  const VarId conv = tape.Conv1d(input, filters);
  const VarId act = tape.Tanh(conv);
  const VarId pooled = tape.MaxPool1d(act, pool_window);
  return tape.SpatialDropout1d(pooled, dropout_p, training, rng);
}

// Classification head: cosine convolution to Z channels (no tanh, the
// loss needs unbounded logits), then mean over time -> [B,Z].
template <typename T>
inline VarId ClassificationHead(Tape<T>& tape, VarId input,
                                const CosBankVars& bank) {
  const VarId filters = GenerateFilters(tape, bank);
  const VarId conv = tape.Conv1d(input, filters);
  return tape.GapTime(conv);
}

// CSV rows: layer,in_ch,out_ch,n,value. One row per generated sample.
template <typename T>
inline void WriteFilterCsv(std::ostream& os, int layer_index,
                           const Tensor<T>& theta1, const Tensor<T>& theta2,
                           int64_t flen) {
  const Tensor<T> filters = GenerateFilterValues(theta1, theta2, flen);
  const int64_t cin = filters.dim(0), cout = filters.dim(1);
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t co = 0; co < cout; ++co) {
      const T* row = filters.ptr() + (ci * cout + co) * flen;
      for (int64_t n = 0; n < flen; ++n) {
        os << layer_index << ',' << ci << ',' << co << ',' << n << ','
           << row[n] << '\n';
      }
    }
  }
}

}  // namespace coscov

#endif  // COSCOV_COS_LAYERS_H_
