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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "advsr/error.hpp"
#include "advsr/lattice.hpp"
#include "advsr/rng.hpp"
#include "oracles.hpp"

using namespace advsr;

namespace {

const std::string M(kBoundaryMarker);

SubwordVocab ab_vocab() {
  return SubwordVocab::from_normal_pieces({{M + "a", -1.0}, {"b", -1.0}, {M + "ab", -1.5}});
}

std::vector<std::string> strings(const SubwordVocab& v, std::span<const int> ids) {
  return piece_strings(v, ids);
}

}  // namespace

TEST_CASE("viterbi prefers the cheaper whole piece") {
  const auto v = ab_vocab();
  CHECK(strings(v, viterbi_word(v, "ab")) == std::vector<std::string>{M + "ab"});
  const auto seg = viterbi_segment(v, "ab ab");
  CHECK(seg.num_words() == 2);
  CHECK(seg.word_spans[1] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("single known character") {
  const auto v = SubwordVocab::from_normal_pieces({{M, -1.0}, {"x", -1.0}, {M + "x", -3.0}});
  CHECK(strings(v, viterbi_word(v, "x")) == std::vector<std::string>{M, "x"});
  const auto v2 = SubwordVocab::from_normal_pieces({{M + "x", -3.0}});
  CHECK(strings(v2, viterbi_word(v2, "x")) == std::vector<std::string>{M + "x"});
}

TEST_CASE("n-best list with log-probs") {
  const auto v = ab_vocab();
  const auto lat = nbest_candidates(v, "ab", 2);
  REQUIRE(lat.candidates.size() == 2);
  CHECK(strings(v, lat.candidates[0]) == std::vector<std::string>{M + "ab"});
  CHECK(strings(v, lat.candidates[1]) == std::vector<std::string>{M + "a", "b"});
  CHECK(lat.log_probs[0] == -1.5);
  CHECK(lat.log_probs[1] == -2.0);
  CHECK(nbest_candidates(v, "ab", 1).candidates[0] == viterbi_word(v, "ab"));
  CHECK_THROWS_AS(nbest_candidates(v, "ab", 0), Error);
  CHECK_THROWS_AS(nbest_candidates(v, "", 3), Error);
}

TEST_CASE("n-best of a word reaches the morpheme split") {
  std::vector<Piece> pieces = {{M + "lovely", -9.0}, {M + "love", -5.0}, {"ly", -3.0}, {M + "lo", -6.0},
                               {"ve", -5.0},         {"l", -7.0},        {"o", -7.0}, {"v", -7.0},
                               {"e", -7.0},          {"y", -7.0},        {M, -4.0}};
  const auto v = SubwordVocab::from_normal_pieces(pieces);
  const auto lat = nbest_candidates(v, "lovely", 9);
  bool found = false;
  for (const auto& c : lat.candidates) found |= strings(v, c) == std::vector<std::string>{M + "love", "ly"};
  CHECK(found);
  CHECK(strings(v, lat.candidates[0]) == std::vector<std::string>{M + "love", "ly"});
}

TEST_CASE("viterbi and n-best equal exhaustive enumeration") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = oracle::random_vocab(rng, "abcde", 25, 4);
    const auto word = oracle::random_word(rng, "abcde", 10);
    const auto all = oracle::enumerate_segmentations(v, word);
    REQUIRE_FALSE(all.empty());
    CHECK(viterbi_word(v, word) == all.front().ids);
    const std::size_t n = 1 + rng.below(12);
    const auto lat = nbest_candidates(v, word, n);
    REQUIRE(lat.candidates.size() == std::min(n, all.size()));
    for (std::size_t k = 0; k < lat.candidates.size(); ++k) {
      CHECK(lat.candidates[k] == all[k].ids);
      CHECK(lat.log_probs[k] == all[k].score);
    }
  }
}

TEST_CASE("sampling follows the tempered distribution") {
  const auto v = ab_vocab();
  const auto lat = nbest_candidates(v, "ab", 2);
  Rng rng(5);
  int first = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) first += sample_candidate_index(lat, 1.0, rng) == 0;
  const double expected = std::exp(-1.5) / (std::exp(-1.5) + std::exp(-2.0));
  CHECK(expected == doctest::Approx(0.6225).epsilon(1e-3));
  CHECK(std::abs(static_cast<double>(first) / draws - expected) < 0.01);
}

TEST_CASE("alpha zero is uniform, alpha infinity is viterbi") {
  const auto v = ab_vocab();
  const auto v3 = SubwordVocab::from_normal_pieces(
      {{M + "a", -1.0}, {"b", -1.0}, {M + "ab", -1.5}, {M, -3.0}, {"a", -2.0}});
  const auto lat = nbest_candidates(v3, "ab", 3);
  REQUIRE(lat.candidates.size() == 3);
  Rng rng(6);
  std::vector<double> freq(3, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) freq[sample_candidate_index(lat, 0.0, rng)] += 1.0 / draws;
  const std::vector<double> uniform(3, 1.0 / 3.0);
  CHECK(oracle::total_variation(freq, uniform) < 0.02);

  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) CHECK(sample_candidate_index(lat, inf, rng) == 0);
  CHECK(sample_segmentation(v, "ab ab", inf, 64, rng) == viterbi_segment(v, "ab ab"));
}

TEST_CASE("one-candidate words are always sampled as themselves") {
  const auto v = SubwordVocab::from_normal_pieces({{M, -1.0}, {"q", -1.0}});
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(sample_segmentation(v, "q q", 0.0, 64, rng) == viterbi_segment(v, "q q"));
}

TEST_CASE("samples stay in the l-best set and detokenize losslessly") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto v = oracle::random_vocab(rng, "abcd", 20, 3);
    std::string sentence;
    const std::size_t words = 1 + rng.below(4);
    for (std::size_t w = 0; w < words; ++w) sentence += (w ? " " : "") + oracle::random_word(rng, "abcd", 7);
    const std::size_t l = 1 + rng.below(5);
    LatticeCache cache(v);
    const auto s = sample_segmentation(cache, sentence, 0.5, l, rng);
    const auto ws = utf8::split_words(sentence);
    REQUIRE(s.num_words() == ws.size());
    for (std::size_t j = 0; j < ws.size(); ++j) {
      const auto lat = nbest_candidates(v, ws[j], l);
      const auto frag = s.word(j);
      const std::vector<int> f(frag.begin(), frag.end());
      CHECK(std::find(lat.candidates.begin(), lat.candidates.end(), f) != lat.candidates.end());
    }
    // Characters without pieces come back as U+2047.
    bool has_unk = std::find(s.piece_ids.begin(), s.piece_ids.end(), SubwordVocab::kUnkId) != s.piece_ids.end();
    if (!has_unk) CHECK(detokenize(v, s.piece_ids) == sentence);
  }
}

TEST_CASE("sampling argument checks") {
  const auto v = ab_vocab();
  Rng rng(1);
  CHECK_THROWS_AS(sample_segmentation(v, "ab", -1.0, 4, rng), Error);
  CHECK_THROWS_AS(sample_segmentation(v, "ab", 0.1, 0, rng), Error);
}

TEST_CASE("segmentation helpers") {
  const auto v = ab_vocab();
  const auto seg = viterbi_segment(v, "ab  ab");
  CHECK(detokenize(v, seg.piece_ids) == "ab ab");
  CHECK(segmentation_from_ids(v, seg.piece_ids) == seg);
  CHECK_THROWS_AS(segmentation_from_ids(v, {*v.id_of("b")}), Error);
  const auto unk = viterbi_segment(v, "z");
  CHECK(detokenize(v, unk.piece_ids) == "\xE2\x81\x87\xE2\x81\x87");
  CHECK(viterbi_segment(v, "   ").piece_ids.empty());
}
