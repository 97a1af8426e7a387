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
#include <span>
#include <string>
#include <vector>

#include "advsr/vocab.hpp"

namespace advsr {

struct VocabTrainConfig {
  // Total vocabulary size including the reserved pieces.
  std::size_t target_size = 16000;
  // Seed pieces kept before EM, as a multiple of target_size.
  std::size_t seed_multiplier = 4;
  std::size_t em_iterations = 4;
  double prune_fraction = 0.2;
  std::size_t max_piece_len = 8;
  double char_coverage = 0.9995;
  double unk_log_prob = SubwordVocab::kDefaultUnkLogProb;
};

// Unigram LM training: frequency-ranked substring seeds, EM over each word's
// segmentation lattice, likelihood-based pruning until target_size is reached.
// Deterministic in (corpus as a multiset of sentences, cfg).
SubwordVocab train_vocab(std::span<const std::string> corpus, const VocabTrainConfig& cfg);

namespace unigram_em {

struct WordCount {
  std::string text;  // marker-prefixed word
  double count = 0.0;
};

// Pieces the EM operates on: no reserved ids; `required` marks single
// characters that are never pruned.
struct PieceSet {
  std::vector<std::string> pieces;
  std::vector<double> log_probs;
  std::vector<bool> required;
};

// Expected piece counts under the current model (forward-backward over each
// word's lattice, scaled by the word count). Returns the corpus log-likelihood
// through `log_likelihood` when non-null.
std::vector<double> expected_counts(const PieceSet& set, std::span<const WordCount> words,
                                    double unk_log_prob, double* log_likelihood = nullptr);

// Maximum-likelihood re-estimate: log(c_i / sum c). Counts below
// kMinExpectedCount are raised to it so required characters keep a finite
// probability.
inline constexpr double kMinExpectedCount = 1e-6;
std::vector<double> m_step(std::span<const double> counts);

// One EM iteration (E-step followed by M-step) in place.
void em_iteration(PieceSet& set, std::span<const WordCount> words, double unk_log_prob);

}  // namespace unigram_em
}  // namespace advsr
