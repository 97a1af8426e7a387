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
#include <filesystem>
#include <string>
#include <vector>

#include "advsr/error.hpp"
#include "advsr/lattice.hpp"
#include "advsr/rng.hpp"
#include "advsr/toy_task.hpp"
#include "advsr/utf8.hpp"
#include "advsr/vocab.hpp"
#include "advsr/vocab_trainer.hpp"
#include "oracles.hpp"

using namespace advsr;

namespace {

const std::string M(kBoundaryMarker);

double normal_mass(const SubwordVocab& v) {
  double s = 0.0;
  for (std::size_t i = SubwordVocab::kNumReserved; i < v.size(); ++i) s += std::exp(v.log_prob(static_cast<int>(i)));
  return s;
}

std::vector<std::string> toy_corpus(std::size_t pairs, std::uint64_t seed) {
  ToyTaskConfig cfg;
  cfg.train_pairs = pairs;
  cfg.valid_pairs = cfg.test_pairs = 1;
  cfg.stems = 30;
  cfg.seed = seed;
  const auto task = make_toy_task(cfg);
  std::vector<std::string> out = task.train.src;
  out.insert(out.end(), task.train.tgt.begin(), task.train.tgt.end());
  return out;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("alphabet-only vocab on a tiny corpus") {
  VocabTrainConfig cfg;
  cfg.target_size = SubwordVocab::kNumReserved + 3;
  const std::vector<std::string> corpus = {"ab ab ab"};
  const auto v = train_vocab(corpus, cfg);
  REQUIRE(v.size() == 7);
  // Only one segmentation remains, so EM gives each piece a third.
  for (const char* p : {"a", "b"}) CHECK(*v.piece_log_prob(p) == doctest::Approx(std::log(1.0 / 3.0)));
  CHECK(*v.piece_log_prob(M) == doctest::Approx(std::log(1.0 / 3.0)));
  CHECK_FALSE(v.piece_log_prob(M + "ab"));
}

TEST_CASE("repeated single-character word concentrates on the whole-word piece") {
  VocabTrainConfig cfg;
  cfg.target_size = SubwordVocab::kNumReserved + 3;
  const std::vector<std::string> corpus = {"a a a"};
  const auto v = train_vocab(corpus, cfg);
  REQUIRE(v.piece_log_prob(M + "a"));
  CHECK(std::exp(*v.piece_log_prob(M + "a")) > 0.9999);
  CHECK(normal_mass(v) == doctest::Approx(1.0).epsilon(1e-9));

  cfg.target_size = SubwordVocab::kNumReserved + 2;
  const auto alpha_only = train_vocab(corpus, cfg);
  CHECK(*alpha_only.piece_log_prob("a") == doctest::Approx(std::log(0.5)));
}

TEST_CASE("expected counts match enumeration of every segmentation") {
  using namespace unigram_em;
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    PieceSet set;
    std::vector<std::string> pieces = {M, "a", "b", "c"};
    for (int i = 0; i < 10; ++i) {
      std::string p = rng.uniform() < 0.5 ? M : "";
      const std::size_t len = 1 + rng.below(3);
      for (std::size_t k = 0; k < len; ++k) p += "abcd"[rng.below(4)];
      if (std::find(pieces.begin(), pieces.end(), p) == pieces.end()) pieces.push_back(p);
    }
    double z = 0.0;
    std::vector<double> w;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      w.push_back(0.1 + rng.uniform());
      z += w.back();
    }
    set.pieces = pieces;
    for (double x : w) set.log_probs.push_back(std::log(x / z));
    set.required.assign(pieces.size(), false);

    std::vector<WordCount> words;
    std::vector<std::pair<std::string, double>> brute_words;
    for (int i = 0; i < 5; ++i) {
      const std::string word = M + oracle::random_word(rng, "abcd", 6);
      const double c = 1.0 + static_cast<double>(rng.below(4));
      words.push_back({word, c});
      brute_words.emplace_back(word, c);
    }
    const auto fast = expected_counts(set, words, -16.0);
    const auto slow = oracle::brute_expected_counts(set.pieces, set.log_probs, brute_words, -16.0);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10));

    const auto lp = m_step(fast);
    double mass = 0.0;
    for (double x : lp) mass += std::exp(x);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("trained vocab is normalized, covering and deterministic") {
  const auto corpus = toy_corpus(300, 3);
  VocabTrainConfig cfg;
  cfg.target_size = 120;
  const auto v = train_vocab(corpus, cfg);
  CHECK(v.size() <= 120);
  CHECK(normal_mass(v) == doctest::Approx(1.0).epsilon(1e-6));
  for (const auto& p : v.pieces()) CHECK(p.log_prob <= 0.0);
  for (const auto& s : corpus) {
    const auto seg = viterbi_segment(v, s);
    for (int id : seg.piece_ids) CHECK(id != SubwordVocab::kUnkId);
    CHECK(detokenize(v, seg.piece_ids) == s);
  }

  auto reversed = corpus;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(serialize_vocab(train_vocab(reversed, cfg)) == serialize_vocab(v));
  CHECK(serialize_vocab(train_vocab(corpus, cfg)) == serialize_vocab(v));
}

TEST_CASE("rare characters fall outside coverage") {
  std::vector<std::string> corpus(2000, "aaaa bbbb");
  corpus.push_back("z");
  VocabTrainConfig cfg;
  cfg.target_size = 20;
  cfg.char_coverage = 0.999;
  const auto v = train_vocab(corpus, cfg);
  CHECK_FALSE(v.piece_log_prob("z"));
  const auto seg = viterbi_segment(v, "z");
  CHECK(seg.piece_ids.back() == SubwordVocab::kUnkId);
}

TEST_CASE("train_vocab errors") {
  VocabTrainConfig cfg;
  cfg.target_size = 100;
  CHECK_THROWS_AS(train_vocab(std::vector<std::string>{}, cfg), Error);
  CHECK_THROWS_AS(train_vocab(std::vector<std::string>{"ab", "  "}, cfg), Error);
  cfg.target_size = 5;
  CHECK_THROWS_AS(train_vocab(std::vector<std::string>{"abc"}, cfg), Error);
}

TEST_CASE("vocab file round trip") {
  const auto v = train_vocab(toy_corpus(100, 9), VocabTrainConfig{.target_size = 80});
  const auto parsed = parse_vocab(serialize_vocab(v));
  CHECK(parsed == v);
  const auto path = (std::filesystem::temp_directory_path() / "advsr_vocab_rt.txt").string();
  save_vocab(v, path);
  CHECK(load_vocab(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("piece lookup") {
  const auto v = SubwordVocab::from_normal_pieces({{M + "a", -1.0}, {"b", -2.0}});
  CHECK(*v.piece_log_prob("b") == -2.0);
  CHECK_FALSE(v.piece_log_prob("zz"));
  CHECK(v.starts_word(*v.id_of(M + "a")));
  CHECK_FALSE(v.starts_word(*v.id_of("b")));
}

TEST_CASE("vocab parse errors name the line") {
  const std::string reserved = "<pad>\t0\n<unk>\t-16\n<s>\t0\n</s>\t0\n";
  const std::string dup = reserved + "ab\t-1\na\t-1\nb\t-2\nc\t-2\nab\t-3\n";
  const auto msg = message_of([&] { parse_vocab(dup); });
  CHECK(msg.find("line 9") != std::string::npos);
  CHECK(msg.find("duplicate") != std::string::npos);
  try {
    parse_vocab(dup);
  } catch (const ParseError& e) {
    CHECK(e.line() == 9);
  }

  CHECK(message_of([] { parse_vocab(""); }).find("no pieces") != std::string::npos);
  CHECK(message_of([] { parse_vocab("# advsr-vocab 1\n"); }).find("no pieces") != std::string::npos);
  CHECK_THROWS_AS(parse_vocab(reserved + "a\tx\n"), ParseError);
  CHECK_THROWS_AS(parse_vocab(reserved + "a\t0.5\n"), ParseError);
  CHECK_THROWS_AS(parse_vocab(reserved + "a\tnan\n"), ParseError);
  CHECK_THROWS_AS(parse_vocab(reserved + "a-1\n"), ParseError);
  CHECK_THROWS_AS(parse_vocab(reserved + "a" + M + "\t-1\n"), ParseError);
  CHECK_THROWS_AS(parse_vocab("a\t-1\n<pad>\t0\n"), ParseError);
}

TEST_CASE("vocab constructor invariants") {
  CHECK_THROWS_AS(SubwordVocab::from_normal_pieces({{"a", 0.5}}), Error);
  CHECK_THROWS_AS(SubwordVocab::from_normal_pieces({{"a", -1}, {"a", -2}}), Error);
  CHECK_THROWS_AS(SubwordVocab::from_normal_pieces({{"", -1}}), Error);
  CHECK_THROWS_AS(SubwordVocab(std::vector<Piece>{{"a", -1}}), Error);
}
