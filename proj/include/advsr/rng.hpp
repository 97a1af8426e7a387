// Copyright 2026 The advsr-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace advsr {

// Deterministic random source. The distributions are implemented here rather
// than through <random>'s distribution classes, whose output is not specified
// identically across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  // Independent stream for item `index` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace advsr
