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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "coscov/kernels.hpp"
#include "coscov/rng.hpp"
#include "coscov/tensor.hpp"
#include "doctest.h"

using namespace coscov;

namespace {

Tensor<float> RandTensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  Tensor<float> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) {
    t.data[i] = static_cast<float>(rng.Uniform(lo, hi));
  }
  return t;
}

// Independent conv oracle: per output element, directly sum
// in[b,ci,n+l-floor(L/2)] * filt[ci,co,l] with explicit bounds checks.
Tensor<float> ConvOracle(const Tensor<float>& in, const Tensor<float>& filt) {
  const int64_t b = in.dim(0), cin = in.dim(1), s = in.dim(2);
  const int64_t cout = filt.dim(1), flen = filt.dim(2);
  const int64_t off = flen / 2;
  Tensor<float> out({b, cout, s});
  for (int64_t bb = 0; bb < b; ++bb) {
    for (int64_t co = 0; co < cout; ++co) {
      for (int64_t n = 0; n < s; ++n) {
        float acc = 0.0f;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t l = 0; l < flen; ++l) {
            const int64_t src = n + l - off;
            if (src < 0 || src >= s) continue;
            acc += in.data[(bb * cin + ci) * s + src] *
                   filt.data[(ci * cout + co) * flen + l];
          }
        }
        out.data[(bb * cout + co) * s + n] = acc;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conv1d odd filter on a hand case") {
  const Tensor<float> in({1, 1, 4}, {1, 2, 3, 4});
  const Tensor<float> filt({1, 1, 3}, {1, 10, 100});
  Tensor<float> out({1, 1, 4});
  kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), 1, 1, 1, 4, 3);
  CHECK(out.data[0] == 210.0f);  // pad*1 + 1*10 + 2*100
  CHECK(out.data[1] == 321.0f);
  CHECK(out.data[2] == 432.0f);
  CHECK(out.data[3] == 43.0f);  // 3*1 + 4*10 + pad*100
}

TEST_CASE("conv1d even filter anchors at floor(L/2)") {
  const Tensor<float> in({1, 1, 3}, {1, 2, 3});
  const Tensor<float> filt({1, 1, 2}, {10, 1});
  Tensor<float> out({1, 1, 3});
  kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), 1, 1, 1, 3, 2);
  CHECK(out.data[0] == 1.0f);   // pad*10 + 1*1
  CHECK(out.data[1] == 12.0f);  // 1*10 + 2*1
  CHECK(out.data[2] == 23.0f);
}

TEST_CASE("conv1d length-1 filter scales the input") {
  const Tensor<float> in({1, 1, 3}, {1, -2, 3});
  const Tensor<float> filt({1, 1, 1}, {0.5f});
  Tensor<float> out({1, 1, 3});
  kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), 1, 1, 1, 3, 1);
  CHECK(out.data[0] == 0.5f);
  CHECK(out.data[1] == -1.0f);
  CHECK(out.data[2] == 1.5f);
}

TEST_CASE("conv1d filter longer than the signal") {
  // s=2, L=5, off=2: only taps that land inside [0,2) contribute.
  const Tensor<float> in({1, 1, 2}, {1, 2});
  const Tensor<float> filt({1, 1, 5}, {1, 10, 100, 1000, 10000});
  Tensor<float> out({1, 1, 2});
  kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), 1, 1, 1, 2, 5);
  CHECK(out.data[0] == 1.0f * 100 + 2.0f * 1000);
  CHECK(out.data[1] == 1.0f * 10 + 2.0f * 100);
}

TEST_CASE("conv1d matches the independent oracle on random shapes") {
  Rng rng(101);
  for (int it = 0; it < 30; ++it) {
    const int64_t b = 1 + static_cast<int64_t>(rng.UniformInt(3));
    const int64_t cin = 1 + static_cast<int64_t>(rng.UniformInt(4));
    const int64_t cout = 1 + static_cast<int64_t>(rng.UniformInt(4));
    const int64_t s = 3 + static_cast<int64_t>(rng.UniformInt(14));
    const int64_t flen = 1 + static_cast<int64_t>(rng.UniformInt(9));
    const Tensor<float> in = RandTensor({b, cin, s}, rng);
    const Tensor<float> filt = RandTensor({cin, cout, flen}, rng);
    const Tensor<float> want = ConvOracle(in, filt);
    Tensor<float> serial({b, cout, s}), parallel({b, cout, s});
    kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), serial.ptr(), b, cin,
                                 cout, s, flen);
    kernels::Conv1dForward(in.ptr(), filt.ptr(), parallel.ptr(), b, cin, cout,
                           s, flen);
    for (int64_t i = 0; i < want.numel(); ++i) {
      CHECK(serial.data[i] == doctest::Approx(want.data[i]).epsilon(1e-5));
    }
    CHECK(std::memcmp(serial.ptr(), parallel.ptr(),
                      sizeof(float) * static_cast<size_t>(want.numel())) == 0);
  }
}

TEST_CASE("conv1d backward input is the adjoint of forward") {
  // <gout, Conv(in)> == <BackwardInput(gout), in> up to rounding.
  Rng rng(102);
  for (int it = 0; it < 10; ++it) {
    const int64_t b = 2, cin = 3, cout = 4, s = 11, flen = 5;
    const Tensor<float> in = RandTensor({b, cin, s}, rng);
    const Tensor<float> filt = RandTensor({cin, cout, flen}, rng);
    const Tensor<float> gout = RandTensor({b, cout, s}, rng);
    Tensor<float> out({b, cout, s});
    kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), b, cin, cout,
                                 s, flen);
    Tensor<float> gin({b, cin, s});
    kernels::Conv1dBackwardInputSerial(gout.ptr(), filt.ptr(), gin.ptr(), b,
                                       cin, cout, s, flen);
    double lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < out.numel(); ++i) lhs += double(gout.data[i]) * out.data[i];
    for (int64_t i = 0; i < in.numel(); ++i) rhs += double(gin.data[i]) * in.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));

    Tensor<float> gin_omp({b, cin, s});
    kernels::Conv1dBackwardInput(gout.ptr(), filt.ptr(), gin_omp.ptr(), b, cin,
                                 cout, s, flen);
    CHECK(std::memcmp(gin.ptr(), gin_omp.ptr(),
                      sizeof(float) * static_cast<size_t>(gin.numel())) == 0);
  }
}

TEST_CASE("conv1d backward filters is linear-exact in the filters") {
  // Forward is linear in filters, so <gout, Conv(in; F)> == <gF, F> where
  // gF = BackwardFilters(gout, in).
  Rng rng(103);
  for (int it = 0; it < 10; ++it) {
    const int64_t b = 2, cin = 2, cout = 3, s = 9, flen = 4;
    const Tensor<float> in = RandTensor({b, cin, s}, rng);
    const Tensor<float> filt = RandTensor({cin, cout, flen}, rng);
    const Tensor<float> gout = RandTensor({b, cout, s}, rng);
    Tensor<float> out({b, cout, s});
    kernels::Conv1dForwardSerial(in.ptr(), filt.ptr(), out.ptr(), b, cin, cout,
                                 s, flen);
    Tensor<float> gf({cin, cout, flen});
    kernels::Conv1dBackwardFiltersSerial(gout.ptr(), in.ptr(), gf.ptr(), b, cin,
                                         cout, s, flen);
    double lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < out.numel(); ++i) lhs += double(gout.data[i]) * out.data[i];
    for (int64_t i = 0; i < gf.numel(); ++i) rhs += double(gf.data[i]) * filt.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));

    Tensor<float> gf_omp({cin, cout, flen});
    kernels::Conv1dBackwardFilters(gout.ptr(), in.ptr(), gf_omp.ptr(), b, cin,
                                   cout, s, flen);
    CHECK(std::memcmp(gf.ptr(), gf_omp.ptr(),
                      sizeof(float) * static_cast<size_t>(gf.numel())) == 0);
  }
}

TEST_CASE("maxpool keeps the first of tied maxima and floors the length") {
  const Tensor<float> in({1, 8}, {5, 5, 3, 3, 1, 9, 9, 2});
  Tensor<float> out({1, 4});
  std::vector<int64_t> arg(4);
  kernels::MaxPool1dForwardSerial(in.ptr(), out.ptr(), arg.data(), 1, 8, 2);
  CHECK(out.data[0] == 5.0f);
  CHECK(arg[0] == 0);  // first occurrence
  CHECK(out.data[1] == 3.0f);
  CHECK(arg[1] == 2);
  CHECK(out.data[2] == 9.0f);
  CHECK(arg[2] == 5);

  // s=7, window=2 -> out_len=3; the seventh element is dropped.
  const Tensor<float> odd({1, 7}, {1, 2, 3, 4, 5, 6, 100});
  Tensor<float> out3({1, 3});
  std::vector<int64_t> arg3(3);
  kernels::MaxPool1dForwardSerial(odd.ptr(), out3.ptr(), arg3.data(), 1, 7, 2);
  CHECK(out3.data[2] == 6.0f);
}

TEST_CASE("maxpool backward scatters into the argmax slots") {
  const Tensor<float> in({1, 6}, {1, 7, 2, 2, 9, 0});
  Tensor<float> out({1, 3});
  std::vector<int64_t> arg(3);
  kernels::MaxPool1dForwardSerial(in.ptr(), out.ptr(), arg.data(), 1, 6, 2);
  const Tensor<float> gout({1, 3}, {10, 20, 30});
  Tensor<float> gin({1, 6});
  kernels::MaxPool1dBackward(gout.ptr(), arg.data(), gin.ptr(), 1, 6, 3);
  const Tensor<float> want({1, 6}, {0, 10, 20, 0, 30, 0});
  CHECK(std::memcmp(gin.ptr(), want.ptr(), sizeof(float) * 6) == 0);
}

TEST_CASE("maxpool serial and parallel agree bitwise") {
  Rng rng(104);
  const int64_t rows = 37, s = 64, window = 4;
  const Tensor<float> in = RandTensor({rows, s}, rng);
  Tensor<float> a({rows, s / window}), b({rows, s / window});
  std::vector<int64_t> arg_a(static_cast<size_t>(rows * (s / window)));
  std::vector<int64_t> arg_b(arg_a.size());
  kernels::MaxPool1dForwardSerial(in.ptr(), a.ptr(), arg_a.data(), rows, s, window);
  kernels::MaxPool1dForward(in.ptr(), b.ptr(), arg_b.data(), rows, s, window);
  CHECK(std::memcmp(a.ptr(), b.ptr(), sizeof(float) * static_cast<size_t>(a.numel())) == 0);
  CHECK(arg_a == arg_b);
}

TEST_CASE("tanh is clamped to the open interval") {
  CHECK(kernels::TanhClamped(0.0f) == 0.0f);
  const float top = kernels::TanhClamped(100.0f);
  const float bottom = kernels::TanhClamped(-100.0f);
  CHECK(top < 1.0f);
  CHECK(bottom > -1.0f);
  CHECK(top == std::nextafter(1.0f, 0.0f));
  CHECK(bottom == -std::nextafter(1.0f, 0.0f));
  CHECK(kernels::TanhClamped(0.5f) == doctest::Approx(std::tanh(0.5)).epsilon(1e-6));
  CHECK(kernels::TanhClamped(-0.5f) == -kernels::TanhClamped(0.5f));
}

TEST_CASE("tanh serial and parallel agree bitwise") {
  Rng rng(105);
  const int64_t n = 10007;
  const Tensor<float> in = RandTensor({n}, rng, -30.0, 30.0);
  Tensor<float> a({n}), b({n});
  kernels::TanhForwardSerial(in.ptr(), a.ptr(), n);
  kernels::TanhForward(in.ptr(), b.ptr(), n);
  CHECK(std::memcmp(a.ptr(), b.ptr(), sizeof(float) * static_cast<size_t>(n)) == 0);
}

TEST_CASE("dense matches a plain matmul with bias") {
  const Tensor<float> in({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor<float> w({3, 2}, {1, 10, 2, 20, 3, 30});
  const Tensor<float> bias({2}, {0.5f, -0.5f});
  Tensor<float> out({2, 2});
  kernels::DenseForwardSerial(in.ptr(), w.ptr(), bias.ptr(), out.ptr(), 2, 3, 2);
  CHECK(out.data[0] == doctest::Approx(1 + 4 + 9 + 0.5));
  CHECK(out.data[1] == doctest::Approx(10 + 40 + 90 - 0.5));
  CHECK(out.data[2] == doctest::Approx(4 + 10 + 18 + 0.5));
  CHECK(out.data[3] == doctest::Approx(40 + 100 + 180 - 0.5));

  Tensor<float> omp({2, 2});
  kernels::DenseForward(in.ptr(), w.ptr(), bias.ptr(), omp.ptr(), 2, 3, 2);
  CHECK(std::memcmp(out.ptr(), omp.ptr(), sizeof(float) * 4) == 0);
}

TEST_CASE("vq nearest matches brute force with lowest-index ties") {
  Rng rng(106);
  for (int it = 0; it < 200; ++it) {
    const int64_t rows = 1 + static_cast<int64_t>(rng.UniformInt(6));
    const int64_t k = 1 + static_cast<int64_t>(rng.UniformInt(16));
    const int64_t d = 1 + static_cast<int64_t>(rng.UniformInt(8));
    const Tensor<float> feats = RandTensor({rows, d}, rng);
    const Tensor<float> codes = RandTensor({k, d}, rng);
    std::vector<int64_t> got(static_cast<size_t>(rows));
    kernels::VqNearest(feats.ptr(), codes.ptr(), rows, k, d, got.data());
    for (int64_t r = 0; r < rows; ++r) {
      int64_t want = 0;
      float best = std::numeric_limits<float>::max();
      for (int64_t j = 0; j < k; ++j) {
        float dist = 0.0f;
        for (int64_t t = 0; t < d; ++t) {
          const float diff = feats.data[r * d + t] - codes.data[j * d + t];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          want = j;
        }
      }
      CHECK(got[static_cast<size_t>(r)] == want);
    }
  }
}

TEST_CASE("vq nearest prefers the lowest index among duplicates") {
  const Tensor<float> feats({1, 2}, {0.3f, 0.3f});
  const Tensor<float> codes({3, 2}, {0.3f, 0.3f, 0.3f, 0.3f, 9.0f, 9.0f});
  std::vector<int64_t> idx(1);
  kernels::VqNearestSerial(feats.ptr(), codes.ptr(), 1, 3, 2, idx.data());
  CHECK(idx[0] == 0);
}

TEST_CASE("vq nearest serial and parallel agree") {
  Rng rng(107);
  const int64_t rows = 43, k = 19, d = 11;
  const Tensor<float> feats = RandTensor({rows, d}, rng);
  const Tensor<float> codes = RandTensor({k, d}, rng);
  std::vector<int64_t> a(static_cast<size_t>(rows)), b(static_cast<size_t>(rows));
  kernels::VqNearestSerial(feats.ptr(), codes.ptr(), rows, k, d, a.data());
  kernels::VqNearest(feats.ptr(), codes.ptr(), rows, k, d, b.data());
  CHECK(a == b);
}

TEST_CASE("thread cap reporting is sane") {
  CHECK(kernels::MaxThreads() >= 1);
}
