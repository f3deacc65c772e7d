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
#include <sstream>
#include <string>

#include "coscov/cos_layers.hpp"
#include "coscov/rng.hpp"
#include "coscov/tape.hpp"
#include "coscov/tensor.hpp"
#include "doctest.h"

using namespace coscov;

TEST_CASE("filter samples follow theta1*cos(theta2*n) exactly") {
  const Tensor<float> t1({1, 1}, {0.75f});
  const Tensor<float> t2({1, 1}, {1.3f});
  const Tensor<float> f = GenerateFilterValues(t1, t2, 6);
  CHECK(f.ShapeStr() == "[1,1,6]");
  for (int n = 0; n < 6; ++n) {
    CHECK(f.data[n] ==
          doctest::Approx(0.75 * std::cos(1.3 * n)).epsilon(1e-6));
  }
  // Left anchor: sample 0 is always the raw amplitude.
  CHECK(f.data[0] == 0.75f);
}

TEST_CASE("theta2 = 0 collapses to a constant boxcar") {
  const Tensor<float> t1({1, 1}, {0.5f});
  const Tensor<float> t2({1, 1}, {0.0f});
  const Tensor<float> f = GenerateFilterValues(t1, t2, 5);
  for (int n = 0; n < 5; ++n) CHECK(f.data[n] == 0.5f);
}

TEST_CASE("doubling theta1 doubles every filter sample bitwise") {
  Rng rng(11);
  Tensor<float> t1({3, 4}), t2({3, 4});
  InitCosBankParams(t1, t2, rng);
  Tensor<float> t1x2 = t1;
  for (int64_t i = 0; i < t1x2.numel(); ++i) t1x2.data[i] *= 2.0f;
  const Tensor<float> f = GenerateFilterValues(t1, t2, 9);
  const Tensor<float> f2 = GenerateFilterValues(t1x2, t2, 9);
  for (int64_t i = 0; i < f.numel(); ++i) {
    CHECK(f2.data[i] == 2.0f * f.data[i]);
  }
}

TEST_CASE("bank init draws amplitude in (-1,1) and phase step in [0,pi)") {
  Rng rng(12);
  Tensor<float> t1({16, 16}), t2({16, 16});
  InitCosBankParams(t1, t2, rng);
  float t1_min = 1e9f, t1_max = -1e9f, t2_min = 1e9f, t2_max = -1e9f;
  for (int64_t i = 0; i < t1.numel(); ++i) {
    t1_min = std::min(t1_min, t1.data[i]);
    t1_max = std::max(t1_max, t1.data[i]);
    t2_min = std::min(t2_min, t2.data[i]);
    t2_max = std::max(t2_max, t2.data[i]);
  }
  CHECK(t1_min >= -1.0f);
  CHECK(t1_max < 1.0f);
  CHECK(t2_min >= 0.0f);
  CHECK(t2_max < static_cast<float>(kPi));
  // With 256 draws both halves of each range should be populated.
  CHECK(t1_min < -0.5f);
  CHECK(t1_max > 0.5f);
  CHECK(t2_max > kPi / 2);
}

TEST_CASE("tape filter generation agrees with the tape-free path") {
  Rng rng(13);
  Tensor<float> t1({2, 3}), t2({2, 3});
  InitCosBankParams(t1, t2, rng);
  const Tensor<float> want = GenerateFilterValues(t1, t2, 7);

  Tape<float> tape;
  CosBankVars bank;
  bank.theta1 = tape.Leaf(t1, true);
  bank.theta2 = tape.Leaf(t2, true);
  bank.filter_len = 7;
  const VarId f = GenerateFilters(tape, bank);
  CHECK(tape.Value(f).SameShape(want));
  for (int64_t i = 0; i < want.numel(); ++i) {
    CHECK(tape.Value(f).data[i] == want.data[i]);
  }
}

TEST_CASE("hidden block shape schedule and activation range") {
  Tape<float> tape;
  Rng rng(14);
  Tensor<float> t1({2, 5}), t2({2, 5});
  InitCosBankParams(t1, t2, rng);
  CosBankVars bank;
  bank.theta1 = tape.Leaf(t1, true);
  bank.theta2 = tape.Leaf(t2, true);
  bank.filter_len = 11;

  Tensor<float> x({3, 2, 40});
  for (int64_t i = 0; i < x.numel(); ++i) {
    x.data[i] = static_cast<float>(rng.Uniform(-1.0, 1.0));
  }
  const VarId in = tape.Leaf(std::move(x), false);
  const VarId out = tape.CosFilters(bank.theta1, bank.theta2, 11);
  (void)out;
  const VarId block = CosCovLayerForward(tape, in, bank, 4, 0.0, false, rng);
  CHECK(tape.Value(block).ShapeStr() == "[3,5,10]");
  for (int64_t i = 0; i < tape.Value(block).numel(); ++i) {
    const float v = tape.Value(block).data[i];
    CHECK(v > -1.0f);
    CHECK(v < 1.0f);  // tanh then max keeps the open interval
  }
}

TEST_CASE("classification head emits unbounded logits via time averaging") {
  Tape<float> tape;
  // Amplitude 3 with zero phase step makes the conv a scaled sum, so the
  // head must be able to exceed the tanh range.
  CosBankVars bank;
  bank.theta1 = tape.Leaf(Tensor<float>({1, 2}, {3.0f, -3.0f}), true);
  bank.theta2 = tape.Leaf(Tensor<float>({1, 2}, {0.0f, 0.0f}), true);
  bank.filter_len = 3;
  Tensor<float> x({1, 1, 4}, {1, 1, 1, 1});
  const VarId in = tape.Leaf(std::move(x), false);
  const VarId logits = ClassificationHead(tape, in, bank);
  CHECK(tape.Value(logits).ShapeStr() == "[1,2]");
  // Each interior tap sees 3 ones, boundary taps 2: mean = 3*(2+3+3+2)/4.
  CHECK(tape.Value(logits).data[0] == doctest::Approx(3.0 * 10.0 / 4.0));
  CHECK(tape.Value(logits).data[1] == doctest::Approx(-3.0 * 10.0 / 4.0));
  CHECK(std::abs(tape.Value(logits).data[0]) > 1.0f);
}

TEST_CASE("filter export writes one row per generated sample") {
  Rng rng(15);
  Tensor<float> t1({2, 3}), t2({2, 3});
  InitCosBankParams(t1, t2, rng);
  std::ostringstream os;
  WriteFilterCsv(os, 4, t1, t2, 5);
  const std::string text = os.str();
  int64_t rows = 0;
  for (char ch : text) rows += (ch == '\n');
  CHECK(rows == 2 * 3 * 5);

  // First row is layer,in_ch,out_ch,n,value for (0,0,0): value == theta1[0].
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::istringstream fields(line);
  int layer, ci, co, n;
  char comma;
  float value;
  fields >> layer >> comma >> ci >> comma >> co >> comma >> n >> comma >> value;
  CHECK(layer == 4);
  CHECK(ci == 0);
  CHECK(co == 0);
  CHECK(n == 0);
  CHECK(value == doctest::Approx(t1.data[0]).epsilon(1e-5));
}
