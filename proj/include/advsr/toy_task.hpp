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

// Synthetic concatenative-morphology translation task. Source words are
// stem + suffix strings over a small alphabet; the target word is the image of
// the stem under a fixed stem map followed by the image of the suffix under a
// fixed suffix map, word order preserved. A share of the stem/suffix
// combinations never occurs in training but does occur in valid/test.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace advsr {

struct ParallelCorpus {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
};

struct ToyTaskConfig {
  std::size_t train_pairs = 5000;
  std::size_t valid_pairs = 500;
  std::size_t test_pairs = 500;
  std::size_t stems = 100;
  std::size_t suffixes = 10;
  std::size_t min_words = 4;
  std::size_t max_words = 7;
  std::size_t min_stem_len = 3;
  std::size_t max_stem_len = 6;
  std::size_t min_suffix_len = 1;
  std::size_t max_suffix_len = 3;
  double heldout_fraction = 0.2;
  std::string alphabet = "abcdefghijklmnoprstu";
  std::uint64_t seed = 7;
};

struct ToyTask {
  ParallelCorpus train, valid, test;
  std::vector<std::string> source_stems, target_stems, source_suffixes, target_suffixes;
};

ToyTask make_toy_task(const ToyTaskConfig& cfg);

// Writes {train,valid,test}.{src,tgt} into `dir` (created if missing).
void write_toy_task(const ToyTask& task, const std::string& dir);

}  // namespace advsr
