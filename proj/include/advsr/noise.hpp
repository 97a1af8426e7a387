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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advsr/rng.hpp"

namespace advsr {

enum class NoiseOp { kDrop, kReplace, kInsert };

// Synthetic typo model: every word is independently perturbed with
// probability `fraction` by exactly one edit of a uniformly chosen enabled op
// at a uniformly chosen position.
struct NoiseSpec {
  double fraction = 0.0;
  std::vector<NoiseOp> ops = {NoiseOp::kDrop, NoiseOp::kReplace, NoiseOp::kInsert};
  // Characters used by replace and insert.
  std::vector<std::string> alphabet;
  std::uint64_t seed = 0;

  void validate() const;
};

// "drop,replace,insert" (any non-empty subset, comma separated).
std::vector<NoiseOp> parse_noise_ops(std::string_view text);
std::string_view noise_op_name(NoiseOp op);

// Distinct characters of the corpus (excluding whitespace), sorted.
std::vector<std::string> corpus_alphabet(std::span<const std::string> sentences);
std::vector<std::string> parse_alphabet(std::string_view chars);

// One edit applied to a single word. A drop on a one-character word becomes a
// replacement.
std::string perturb_word(std::string_view word, const NoiseSpec& spec, Rng& rng);

struct NoiseStats {
  std::size_t words = 0;
  std::size_t perturbed = 0;
};

// Sentence i uses the random stream (seed, i); words are re-joined with
// single spaces.
std::vector<std::string> noisify_corpus(std::span<const std::string> sentences,
                                        const NoiseSpec& spec, NoiseStats* stats = nullptr);

}  // namespace advsr
