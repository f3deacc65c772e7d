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

#ifndef COSCOV_VQ_H_
#define COSCOV_VQ_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "coscov/errors.hpp"
#include "coscov/kernels.hpp"
#include "coscov/rng.hpp"
#include "coscov/tape.hpp"
#include "coscov/tensor.hpp"

// Vector quantisation. Each (batch, channel) feature row of length d is
// replaced by its nearest codebook row (squared Euclidean distance, ties
// to the lowest index). The replacement is non-differentiable, so the
// quantised output reaches the features through a straight-through copy,
// while the codebook and the encoder are trained by two one-sided loss
// terms whose stop-gradient sides enter as constants. Losses are means
// over the B*C rows; the norm inside each row is summed over d, which the
// worked unit cases pin down exactly.

namespace coscov {

template <typename T>
struct VqNearestResult {
  std::vector<int64_t> indices;  // one per flattened row
  Tensor<T> quantised;           // same shape as features; rows copied
                                 // bit-exactly from the codebook
};

// features: any shape [..., d]; codebook: [k, d].
template <typename T>
VqNearestResult<T> VqNearestLookup(const Tensor<T>& codebook,
                                   const Tensor<T>& features) {
  if (codebook.rank() != 2 || codebook.dim(0) < 1) {
    throw ConfigError("vq: codebook must be non-empty [k,d], got " +
                      codebook.ShapeStr());
  }
  const int64_t k = codebook.dim(0), d = codebook.dim(1);
  if (features.rank() < 1 || features.numel() % d != 0 ||
      features.dim(features.rank() - 1) != d) {
    throw ConfigError("vq: feature rows of length " + std::to_string(d) +
                      " required, got " + features.ShapeStr());
  }
  const int64_t rows = features.numel() / d;
  VqNearestResult<T> out;
  out.indices.resize(static_cast<size_t>(rows));
  kernels::VqNearest(features.ptr(), codebook.ptr(), rows, k, d,
                     out.indices.data());
  out.quantised = Tensor<T>(features.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const T* src = codebook.ptr() + out.indices[r] * d;
    T* dst = out.quantised.ptr() + r * d;
    for (int64_t t = 0; t < d; ++t) dst[t] = src[t];
  }
  return out;
}

template <typename T>
struct VqLayerOutput {
  VarId quantised = -1;        // straight-through features
  VarId codebook_loss = -1;    // scalar
  VarId commitment_loss = -1;  // scalar
  std::vector<int64_t> indices;
};

// Full layer: lookup, straight-through, both loss terms.
template <typename T>
VqLayerOutput<T> ApplyVq(Tape<T>& tape, VarId features, VarId codebook,
                         T beta) {
  const Tensor<T>& f = tape.Value(features);
  const Tensor<T>& e = tape.Value(codebook);
  VqNearestResult<T> nearest = VqNearestLookup(e, f);
  VqLayerOutput<T> out;
  out.quantised = tape.VqStraightThrough(features, nearest.quantised);
  out.codebook_loss = tape.VqCodebookLoss(codebook, f, nearest.indices);
  out.commitment_loss =
      tape.VqCommitmentLoss(features, nearest.quantised, beta, e.dim(1));
  out.indices = std::move(nearest.indices);
  return out;
}

// Features entering VQ are post-tanh, so uniform over their full range.
template <typename T>
inline void InitCodebook(Tensor<T>& codebook, Rng& rng) {
  for (int64_t i = 0; i < codebook.numel(); ++i) {
    codebook.data[i] = static_cast<T>(rng.Uniform(-1.0, 1.0));
  }
}

// CSV rows: index,hit_count. Diagnoses dead codes.
inline void WriteCodebookHistogram(std::ostream& os,
                                   const std::vector<int64_t>& indices,
                                   int64_t k) {
  std::vector<int64_t> hits(static_cast<size_t>(k), 0);
  for (int64_t idx : indices) ++hits[static_cast<size_t>(idx)];
  os << "index,hit_count\n";
  for (int64_t j = 0; j < k; ++j) os << j << ',' << hits[j] << '\n';
}

}  // namespace coscov

#endif  // COSCOV_VQ_H_
