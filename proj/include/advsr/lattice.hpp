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
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "advsr/rng.hpp"
#include "advsr/vocab.hpp"

namespace advsr {

// A segmented sentence: piece ids plus the [begin, end) ranges grouping them
// into whitespace-delimited words. Every word's first piece starts with the
// boundary marker.
struct Segmentation {
  std::vector<int> piece_ids;
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;

  std::size_t num_words() const { return word_spans.size(); }
  std::span<const int> word(std::size_t j) const {
    const auto [b, e] = word_spans[j];
    return std::span<const int>(piece_ids).subspan(b, e - b);
  }
  // Appends one word's fragment.
  void append_word(std::span<const int> fragment);
  bool operator==(const Segmentation&) const = default;
};

// Candidate segmentations of one word, best first.
struct WordLattice {
  std::string word;
  std::vector<std::vector<int>> candidates;
  std::vector<double> log_probs;
};

// The text the lattice is built over: marker + word.
std::string marked_word(const SubwordVocab& vocab, std::string_view word);

// Best segmentation of a single word. Ties: higher total log-prob, then fewer
// pieces, then the lexicographically smallest id sequence.
std::vector<int> viterbi_word(const SubwordVocab& vocab, std::string_view word);

// Viterbi segmentation of every whitespace-separated word of the sentence.
Segmentation viterbi_segment(const SubwordVocab& vocab, std::string_view sentence);

// The min(n, total) best distinct segmentations of `word`, ordered as
// viterbi_word orders them; candidates[0] is the Viterbi result.
WordLattice nbest_candidates(const SubwordVocab& vocab, std::string_view word, std::size_t n);

// Sum of the unigram log-probs of a fragment.
double fragment_log_prob(const SubwordVocab& vocab, std::span<const int> fragment);

// Memoizes n-best lists per (word, n) for a fixed vocab. Not thread-safe; use
// one cache per worker.
class LatticeCache {
 public:
  explicit LatticeCache(const SubwordVocab& vocab) : vocab_(&vocab) {}
  const WordLattice& nbest(std::string_view word, std::size_t n);
  const SubwordVocab& vocab() const { return *vocab_; }

 private:
  const SubwordVocab* vocab_;
  std::unordered_map<std::string, WordLattice> entries_;
};

// Draws one of the word's l-best candidates with probability proportional to
// P(candidate)^alpha. alpha = +inf selects the Viterbi candidate.
std::size_t sample_candidate_index(const WordLattice& lattice, double alpha, Rng& rng);

// Smoothed sampling applied word by word (subword regularization).
Segmentation sample_segmentation(const SubwordVocab& vocab, std::string_view sentence,
                                 double alpha, std::size_t l, Rng& rng);
Segmentation sample_segmentation(LatticeCache& cache, std::string_view sentence, double alpha,
                                 std::size_t l, Rng& rng);
Segmentation viterbi_segment(LatticeCache& cache, std::string_view sentence);

inline constexpr double kDefaultSampleAlpha = 0.1;
inline constexpr std::size_t kDefaultSampleL = 64;

// Concatenates the pieces, turns boundary markers back into spaces and
// renders unknown pieces as U+2047.
std::string detokenize(const SubwordVocab& vocab, std::span<const int> piece_ids);
std::vector<std::string> piece_strings(const SubwordVocab& vocab, std::span<const int> piece_ids);

// Rebuilds word spans from boundary markers; throws advsr::Error when the
// first piece does not start a word.
Segmentation segmentation_from_ids(const SubwordVocab& vocab, std::vector<int> piece_ids);

}  // namespace advsr
