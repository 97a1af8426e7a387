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

// Corpus BLEU with a 13a-style tokenizer, lowercasing, and exponential
// smoothing of zero n-gram matches.
//
// Tokenizer rules, applied to the lowercased text padded with spaces:
//   1. every character in {|}~ [\]^_` space!"#$%& ()*+ :;<=>?@ /  is isolated;
//   2. '.' and ',' are split off unless preceded by a digit;
//   3. '.' and ',' are split off unless followed by a digit;
//   4. '-' is split off when preceded by a digit;
// then the text is split on whitespace. Lowercasing is ASCII-only.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advsr {

inline constexpr int kBleuMaxOrder = 4;

std::vector<std::string> tokenize_eval(std::string_view text);

struct BleuStats {
  std::array<std::size_t, kBleuMaxOrder> correct{};
  std::array<std::size_t, kBleuMaxOrder> total{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

struct BleuReport {
  double bleu = 0.0;  // [0, 100]
  std::array<double, kBleuMaxOrder> precisions{};  // percent, after smoothing
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  BleuStats stats;
};

BleuStats sentence_stats(std::span<const std::string> hyp, std::span<const std::string> ref);
BleuReport bleu_from_stats(const BleuStats& stats);

// Throws advsr::Error when the corpora differ in length.
BleuReport corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs);

// Human-readable summary line followed by key=value lines.
std::string format_bleu_report(const BleuReport& r);

}  // namespace advsr
