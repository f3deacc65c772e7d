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

#ifndef COSCOV_MEMORY_H_
#define COSCOV_MEMORY_H_

#include <cstdint>

#include "coscov/cos_layers.hpp"
#include "coscov/errors.hpp"
#include "coscov/tape.hpp"

// Learned memory vector [1,M] with per-layer Reader and Writer blocks.
// The working memory is a per-forward-pass broadcast copy of the learned
// initial vector; it never persists across batches. A Reader turns the
// memory into a multiplicative gate on layer features; a Writer folds
// features back into the memory through a residual tanh update, so each
// write moves every component by at most 1 in absolute value (the update
// itself is clamped strictly inside (-1,1) before the residual addition).

namespace coscov {

// Writer GAP axis. Channels removes C (the default); time is the
// conventional alternative and changes the F_W input width from S to C.
enum class WriterGapAxis { kChannels, kTime };

// F_R: dense M -> S_l; CCL_R: cosine conv 1 -> C_l channels.
struct ReaderVars {
  VarId fr_w = -1;  // [M, S]
  VarId fr_b = -1;  // [S]
  CosBankVars ccl;  // [1, C], filter_len small
};

// CCL_W: cosine conv C_l -> C_l; F_W: dense (S or C) -> M.
struct WriterVars {
  CosBankVars ccl;  // [C, C]
  VarId fw_w = -1;  // [S, M] for channels-GAP, [C, M] for time-GAP
  VarId fw_b = -1;  // [M]
};

// gate = tanh(CCL_R(tanh(F_R(mem)))) as [B,C,S]; returns f_l * gate.
template <typename T>
VarId MemoryRead(Tape<T>& tape, VarId mem, VarId f_l, const ReaderVars& r) {
  const Tensor<T>& f = tape.Value(f_l);
  if (f.rank() != 3) {
    throw ConfigError("memory_read: features must be [B,C,S], got " +
                      f.ShapeStr());
  }
  const int64_t b = f.dim(0), s = f.dim(2);
  VarId h = tape.Dense(mem, r.fr_w, r.fr_b);  // [B,S]
  h = tape.Tanh(h);
  h = tape.Reshape(h, {b, 1, s});
  const VarId filters = GenerateFilters(tape, r.ccl);  // [1,C,L]
  h = tape.Conv1d(h, filters);                         // [B,C,S]
  h = tape.Tanh(h);
  return tape.Mul(f_l, h);
}

// new_mem = mem + tanh(F_W(GAP(tanh(CCL_W(f_l'))))).
template <typename T>
VarId MemoryWrite(Tape<T>& tape, VarId mem, VarId f_lp, const WriterVars& w,
                  WriterGapAxis gap_axis = WriterGapAxis::kChannels) {
  const Tensor<T>& f = tape.Value(f_lp);
  if (f.rank() != 3) {
    throw ConfigError("memory_write: features must be [B,C,S], got " +
                      f.ShapeStr());
  }
  const VarId filters = GenerateFilters(tape, w.ccl);  // [C,C,L]
  VarId h = tape.Conv1d(f_lp, filters);                // [B,C,S]
  h = tape.Tanh(h);
  h = (gap_axis == WriterGapAxis::kChannels) ? tape.GapChannels(h)
                                             : tape.GapTime(h);
  h = tape.Dense(h, w.fw_w, w.fw_b);  // [B,M]
  h = tape.Tanh(h);
  return tape.Add(mem, h);
}

}  // namespace coscov

#endif  // COSCOV_MEMORY_H_
