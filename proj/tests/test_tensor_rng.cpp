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
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "coscov/errors.hpp"
#include "coscov/rng.hpp"
#include "coscov/tensor.hpp"
#include "doctest.h"

using namespace coscov;

TEST_CASE("tensor shape accounting") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(2) == 4);
  CHECK(t.ShapeStr() == "[2,3,4]");
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(t.data[i] == 0.0f);
}

TEST_CASE("tensor data constructor rejects mismatched payload") {
  CHECK_THROWS_AS(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}), ConfigError);
  const Tensor<float> ok({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(ok.data[3] == 4.0f);
}

TEST_CASE("tensor full, cast, same-shape, finite checks") {
  const Tensor<double> full = Tensor<double>::Full({3}, 2.5);
  CHECK(full.data[2] == 2.5);
  const Tensor<float> cast = full.Cast<float>();
  CHECK(cast.data[1] == 2.5f);
  CHECK(full.SameShape(Tensor<double>({3})));
  CHECK_FALSE(full.SameShape(Tensor<double>({3, 1})));

  Tensor<float> bad({2});
  bad.data[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(bad.AllFinite());
  bad.data[1] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(bad.AllFinite());
  bad.data[1] = 1.0f;
  CHECK(bad.AllFinite());
}

TEST_CASE("rng streams are deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool diverged = false;
  for (int i = 0; i < 64; ++i) {
    const uint64_t va = a.NextU64();
    CHECK(va == b.NextU64());
    diverged = diverged || (va != c.NextU64());
  }
  CHECK(diverged);
}

TEST_CASE("uniform draws respect their interval") {
  Rng rng(7);
  for (int i = 0; i < 4096; ++i) {
    const double u = rng.NextUnit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.Uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("uniform ints cover the range without bias artefacts") {
  Rng rng(11);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const uint64_t v = rng.UniformInt(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK(rng.UniformInt(1) == 0);
}

TEST_CASE("normal draws have the requested moments") {
  Rng rng(13);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.Normal(1.0, 2.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("bernoulli edge probabilities") {
  Rng rng(17);
  for (int i = 0; i < 256; ++i) {
    CHECK_FALSE(rng.Bernoulli(0.0));
    CHECK(rng.Bernoulli(1.0));
  }
}

TEST_CASE("shuffle permutes without loss") {
  Rng rng(19);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> shuffled = v;
  rng.Shuffle(shuffled);
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
  // Same seed, same permutation.
  Rng rng2(19);
  std::vector<int> again = v;
  rng2.Shuffle(again);
  CHECK(again == shuffled);
}

TEST_CASE("forked streams are decorrelated and reproducible") {
  Rng parent1(23), parent2(23);
  Rng child_a = parent1.Fork(1);
  Rng child_b = parent2.Fork(1);
  Rng child_c = parent1.Fork(2);
  bool differs = false;
  for (int i = 0; i < 32; ++i) {
    const uint64_t va = child_a.NextU64();
    CHECK(va == child_b.NextU64());
    differs = differs || (va != child_c.NextU64());
  }
  CHECK(differs);
}
