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
#include <set>
#include <string>

#include "coscov/errors.hpp"
#include "coscov/gradcheck.hpp"
#include "doctest.h"

using namespace coscov;

TEST_CASE("every hand-derived gradient matches central differences") {
  GradCheckOptions opt;  // 20 instances, h = 1e-5, 64-bit scenarios
  const auto results = RunGradCheckSuite("all", opt);
  CHECK(results.size() == GradCheckOps().size());
  std::set<std::string> seen;
  for (const auto& r : results) {
    CAPTURE(r.op);
    CHECK(r.pass());
    CHECK(r.instances >= 20);
    CHECK(r.checks > 0);
    CHECK(r.failures == 0);
    CHECK(r.max_rel_err <= 1e-4);
    seen.insert(r.op);
  }
  // Core ops, the composed hidden block, and both memory paths are covered.
  for (const char* name :
       {"conv1d", "dense", "tanh", "maxpool", "softmax_ce", "cos_filters",
        "coscov_block", "vq", "memory_read", "memory_write"}) {
    CHECK(seen.count(name) == 1);
  }
}

TEST_CASE("an injected gradient fault is detected") {
  GradCheckOptions opt;
  opt.instances = 3;
  opt.perturb = 1e-3;
  const auto results = RunGradCheckSuite("conv1d", opt);
  REQUIRE(results.size() == 1);
  CHECK(results[0].failures > 0);
  CHECK(!results[0].pass());
}

TEST_CASE("single-op runs and unknown ops") {
  GradCheckOptions opt;
  opt.instances = 2;
  const auto results = RunGradCheckSuite("tanh", opt);
  REQUIRE(results.size() == 1);
  CHECK(results[0].op == "tanh");
  CHECK(results[0].pass());

  CHECK_THROWS_WITH_AS(RunGradCheckSuite("not_an_op", opt),
                       doctest::Contains("gradcheck: unknown op 'not_an_op'"),
                       ConfigError);
}

TEST_CASE("results are deterministic for a fixed seed") {
  GradCheckOptions opt;
  opt.instances = 4;
  const auto a = RunGradCheckSuite("vq", opt);
  const auto b = RunGradCheckSuite("vq", opt);
  CHECK(a[0].max_rel_err == b[0].max_rel_err);
  CHECK(a[0].checks == b[0].checks);
}
