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

#ifndef COSCOV_KERNELS_H_
#define COSCOV_KERNELS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

// Hot inner loops of the engine. Every parallel kernel has a *Serial twin
// that is the reference implementation for tests and benchmarks. The
// parallel versions partition work by output element and keep the exact
// accumulation order of the serial twin inside each element, so results
// are bit-identical for any thread count. Sums are written in axpy form
// (distinct output elements, no cross-iteration float reductions), which
// lets the compiler vectorize them without reassociation flags.
//
// Layouts are row-major: input [B,Cin,S], filters [Cin,Cout,L],
// output [B,Cout,S]. Convolution is cross-correlation with "same" zero
// padding and center offset floor(L/2); with learned filters this is
// equivalent to flipped convolution up to filter reversal.

namespace coscov {
namespace kernels {

template <typename T>
inline void Conv1dRowForward(const T* in_b, const T* filt, T* out_row,
                             int64_t cin, int64_t cout, int64_t co, int64_t s,
                             int64_t flen) {
  const int64_t off = flen / 2;
  for (int64_t n = 0; n < s; ++n) out_row[n] = T(0);
  for (int64_t ci = 0; ci < cin; ++ci) {
    const T* in_row = in_b + ci * s;
    const T* w_row = filt + (ci * cout + co) * flen;
    for (int64_t l = 0; l < flen; ++l) {
      const T w = w_row[l];
      const int64_t shift = l - off;
      const int64_t nlo = std::max<int64_t>(0, -shift);
      const int64_t nhi = std::min<int64_t>(s, s - shift);
      const T* src = in_row + shift;
      for (int64_t n = nlo; n < nhi; ++n) out_row[n] += w * src[n];
    }
  }
}

template <typename T>
void Conv1dForwardSerial(const T* in, const T* filt, T* out, int64_t batch,
                         int64_t cin, int64_t cout, int64_t s, int64_t flen) {
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t co = 0; co < cout; ++co) {
      Conv1dRowForward(in + b * cin * s, filt, out + (b * cout + co) * s, cin,
                       cout, co, s, flen);
    }
  }
}

template <typename T>
void Conv1dForward(const T* in, const T* filt, T* out, int64_t batch,
                   int64_t cin, int64_t cout, int64_t s, int64_t flen) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t co = 0; co < cout; ++co) {
      Conv1dRowForward(in + b * cin * s, filt, out + (b * cout + co) * s, cin,
                       cout, co, s, flen);
    }
  }
}

// grad_input[b,ci,m] += sum_co sum_l grad_out[b,co,m-l+off] * filt[ci,co,l].
// Accumulates into gin; caller zero-initializes.
template <typename T>
inline void Conv1dRowBackwardInput(const T* gout_b, const T* filt, T* gin_row,
                                   int64_t cout, int64_t ci, int64_t s,
                                   int64_t flen) {
  const int64_t off = flen / 2;
  for (int64_t co = 0; co < cout; ++co) {
    const T* g_row = gout_b + co * s;
    const T* w_row = filt + (ci * cout + co) * flen;
    for (int64_t l = 0; l < flen; ++l) {
      const T w = w_row[l];
      const int64_t shift = off - l;  // gout index = m + shift
      const int64_t mlo = std::max<int64_t>(0, -shift);
      const int64_t mhi = std::min<int64_t>(s, s - shift);
      const T* src = g_row + shift;
      for (int64_t m = mlo; m < mhi; ++m) gin_row[m] += w * src[m];
    }
  }
}

template <typename T>
void Conv1dBackwardInputSerial(const T* gout, const T* filt, T* gin,
                               int64_t batch, int64_t cin, int64_t cout,
                               int64_t s, int64_t flen) {
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      Conv1dRowBackwardInput(gout + b * cout * s, filt,
                             gin + (b * cin + ci) * s, cout, ci, s, flen);
    }
  }
}

template <typename T>
void Conv1dBackwardInput(const T* gout, const T* filt, T* gin, int64_t batch,
                         int64_t cin, int64_t cout, int64_t s, int64_t flen) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      Conv1dRowBackwardInput(gout + b * cout * s, filt,
                             gin + (b * cin + ci) * s, cout, ci, s, flen);
    }
  }
}

// grad_filters[ci,co,l] += sum_b sum_n grad_out[b,co,n] * in[b,ci,n+l-off].
// Inner axpy runs over l so each (ci,co) cell is owned by one thread.
template <typename T>
inline void Conv1dPairBackwardFilters(const T* gout, const T* in, T* gf_row,
                                      int64_t batch, int64_t cin, int64_t cout,
                                      int64_t ci, int64_t co, int64_t s,
                                      int64_t flen) {
  const int64_t off = flen / 2;
  for (int64_t b = 0; b < batch; ++b) {
    const T* g_row = gout + (b * cout + co) * s;
    const T* in_row = in + (b * cin + ci) * s;
    for (int64_t n = 0; n < s; ++n) {
      const T g = g_row[n];
      if (g == T(0)) continue;
      const int64_t llo = std::max<int64_t>(0, off - n);
      const int64_t lhi = std::min<int64_t>(flen, s + off - n);
      const T* src = in_row + (n - off);
      for (int64_t l = llo; l < lhi; ++l) gf_row[l] += g * src[l];
    }
  }
}

template <typename T>
void Conv1dBackwardFiltersSerial(const T* gout, const T* in, T* gfilt,
                                 int64_t batch, int64_t cin, int64_t cout,
                                 int64_t s, int64_t flen) {
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t co = 0; co < cout; ++co) {
      Conv1dPairBackwardFilters(gout, in, gfilt + (ci * cout + co) * flen,
                                batch, cin, cout, ci, co, s, flen);
    }
  }
}

template <typename T>
void Conv1dBackwardFilters(const T* gout, const T* in, T* gfilt, int64_t batch,
                           int64_t cin, int64_t cout, int64_t s, int64_t flen) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t co = 0; co < cout; ++co) {
      Conv1dPairBackwardFilters(gout, in, gfilt + (ci * cout + co) * flen,
                                batch, cin, cout, ci, co, s, flen);
    }
  }
}

// Non-overlapping max pooling, stride == window, trailing remainder
// dropped. Ties go to the first index. argmax holds in-row sample indices.
template <typename T>
inline void MaxPoolRow(const T* in_row, T* out_row, int64_t* arg_row,
                       int64_t out_len, int64_t window) {
  for (int64_t ow = 0; ow < out_len; ++ow) {
    const int64_t base = ow * window;
    T best = in_row[base];
    int64_t arg = base;
    for (int64_t w = 1; w < window; ++w) {
      const T v = in_row[base + w];
      if (v > best) {
        best = v;
        arg = base + w;
      }
    }
    out_row[ow] = best;
    arg_row[ow] = arg;
  }
}

template <typename T>
void MaxPool1dForwardSerial(const T* in, T* out, int64_t* argmax, int64_t rows,
                            int64_t s, int64_t window) {
  const int64_t out_len = s / window;
  for (int64_t r = 0; r < rows; ++r) {
    MaxPoolRow(in + r * s, out + r * out_len, argmax + r * out_len, out_len,
               window);
  }
}

template <typename T>
void MaxPool1dForward(const T* in, T* out, int64_t* argmax, int64_t rows,
                      int64_t s, int64_t window) {
  const int64_t out_len = s / window;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    MaxPoolRow(in + r * s, out + r * out_len, argmax + r * out_len, out_len,
               window);
  }
}

// Routes each pooled gradient to the forward argmax position.
template <typename T>
void MaxPool1dBackward(const T* gout, const int64_t* argmax, T* gin,
                       int64_t rows, int64_t s, int64_t out_len) {
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const T* g_row = gout + r * out_len;
    const int64_t* arg_row = argmax + r * out_len;
    T* gin_row = gin + r * s;
    for (int64_t ow = 0; ow < out_len; ++ow) gin_row[arg_row[ow]] += g_row[ow];
  }
}

// tanh clamped to the open interval: the widest representable value
// strictly below 1 replaces results that round to +/-1, which keeps the
// (-1,1) range contract true in floating point for saturated inputs.
template <typename T>
inline T TanhClamped(T x) {
  const T one = T(1);
  T t = std::tanh(x);
  if (t >= one) return std::nextafter(one, T(0));
  if (t <= -one) return -std::nextafter(one, T(0));
  return t;
}

template <typename T>
void TanhForwardSerial(const T* in, T* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = TanhClamped(in[i]);
}

template <typename T>
void TanhForward(const T* in, T* out, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = TanhClamped(in[i]);
}

// out[b,o] = bias[o] + sum_i in[b,i] * w[i,o]
template <typename T>
inline void DenseRowForward(const T* in_row, const T* w, const T* bias,
                            T* out_row, int64_t in_dim, int64_t out_dim) {
  for (int64_t o = 0; o < out_dim; ++o) out_row[o] = bias[o];
  for (int64_t i = 0; i < in_dim; ++i) {
    const T x = in_row[i];
    const T* w_row = w + i * out_dim;
    for (int64_t o = 0; o < out_dim; ++o) out_row[o] += x * w_row[o];
  }
}

template <typename T>
void DenseForwardSerial(const T* in, const T* w, const T* bias, T* out,
                        int64_t batch, int64_t in_dim, int64_t out_dim) {
  for (int64_t b = 0; b < batch; ++b) {
    DenseRowForward(in + b * in_dim, w, bias, out + b * out_dim, in_dim,
                    out_dim);
  }
}

template <typename T>
void DenseForward(const T* in, const T* w, const T* bias, T* out, int64_t batch,
                  int64_t in_dim, int64_t out_dim) {
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < batch; ++b) {
    DenseRowForward(in + b * in_dim, w, bias, out + b * out_dim, in_dim,
                    out_dim);
  }
}

// Nearest codebook row per input row by squared Euclidean distance, ties
// to the lowest index. The scan is kept in plain serial order inside each
// row so indices match a naive exhaustive oracle bit-for-bit; parallelism
// is across rows only.
template <typename T>
inline int64_t VqNearestRow(const T* row, const T* codes, int64_t k,
                            int64_t d) {
  T best = std::numeric_limits<T>::max();
  int64_t arg = 0;
  for (int64_t j = 0; j < k; ++j) {
    const T* code = codes + j * d;
    T acc = T(0);
    for (int64_t t = 0; t < d; ++t) {
      const T diff = row[t] - code[t];
      acc += diff * diff;
    }
    if (acc < best) {
      best = acc;
      arg = j;
    }
  }
  return arg;
}

template <typename T>
void VqNearestSerial(const T* rows, const T* codes, int64_t nrows, int64_t k,
                     int64_t d, int64_t* indices) {
  for (int64_t r = 0; r < nrows; ++r) {
    indices[r] = VqNearestRow(rows + r * d, codes, k, d);
  }
}

template <typename T>
void VqNearest(const T* rows, const T* codes, int64_t nrows, int64_t k,
               int64_t d, int64_t* indices) {
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < nrows; ++r) {
    indices[r] = VqNearestRow(rows + r * d, codes, k, d);
  }
}

inline int MaxThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void SetThreadCap(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace kernels
}  // namespace coscov

#endif  // COSCOV_KERNELS_H_
