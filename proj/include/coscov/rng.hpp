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

#ifndef COSCOV_RNG_H_
#define COSCOV_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace coscov {

// Deterministic RNG. All distributions are derived from raw mt19937_64
// output by hand so that streams are reproducible bit-for-bit across
// platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t NextU64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of entropy.
  double NextUnit() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * NextUnit(); }

  // Box-Muller, one draw per call (the spare is kept).
  double Normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = NextUnit();
    double u2 = NextUnit();
    while (u1 <= 0.0) u1 = NextUnit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + stddev * r * std::cos(a);
  }

  bool Bernoulli(double p) { return NextUnit() < p; }

  // Unbiased integer in [0, n) via rejection of the tail.
  uint64_t UniformInt(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent child stream. splitmix64 finalizer over
  // (seed, stream) keeps children decorrelated.
  Rng Fork(uint64_t stream) {
    uint64_t z = gen_() + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace coscov

#endif  // COSCOV_RNG_H_
