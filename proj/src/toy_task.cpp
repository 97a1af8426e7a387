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

#include "advsr/toy_task.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "advsr/error.hpp"
#include "advsr/rng.hpp"
#include "advsr/utf8.hpp"

namespace advsr {
namespace {

std::vector<std::string> distinct_strings(Rng& rng, const std::vector<std::string_view>& alphabet,
                                          std::size_t count, std::size_t min_len, std::size_t max_len,
                                          std::set<std::string>& taken) {
  std::vector<std::string> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 1000) throw Error("toy task: cannot draw enough distinct strings");
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    if (taken.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  for (const auto& l : lines) os << l << '\n';
}

}  // namespace

ToyTask make_toy_task(const ToyTaskConfig& cfg) {
  if (cfg.stems == 0 || cfg.suffixes == 0) throw Error("toy task: need stems and suffixes");
  if (cfg.min_words == 0 || cfg.max_words < cfg.min_words) throw Error("toy task: bad sentence length");
  const auto alphabet = utf8::split_chars(cfg.alphabet);
  if (alphabet.size() < 2) throw Error("toy task: alphabet too small");
  Rng rng(cfg.seed);
  ToyTask task;
  std::set<std::string> src_taken, tgt_taken;
  task.source_stems = distinct_strings(rng, alphabet, cfg.stems, cfg.min_stem_len, cfg.max_stem_len, src_taken);
  task.target_stems = distinct_strings(rng, alphabet, cfg.stems, cfg.min_stem_len, cfg.max_stem_len, tgt_taken);
  task.source_suffixes =
      distinct_strings(rng, alphabet, cfg.suffixes, cfg.min_suffix_len, cfg.max_suffix_len, src_taken);
  task.target_suffixes =
      distinct_strings(rng, alphabet, cfg.suffixes, cfg.min_suffix_len, cfg.max_suffix_len, tgt_taken);

  std::vector<std::pair<std::size_t, std::size_t>> seen, all;
  for (std::size_t s = 0; s < cfg.stems; ++s) {
    for (std::size_t x = 0; x < cfg.suffixes; ++x) {
      all.emplace_back(s, x);
      if (rng.uniform() >= cfg.heldout_fraction) seen.emplace_back(s, x);
    }
  }
  if (seen.empty()) throw Error("toy task: every combination held out");

  auto sentence = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pool,
                      ParallelCorpus& out) {
    const std::size_t n = cfg.min_words + rng.below(cfg.max_words - cfg.min_words + 1);
    std::string src, tgt;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [s, x] = pool[rng.below(pool.size())];
      if (i > 0) {
        src += ' ';
        tgt += ' ';
      }
      src += task.source_stems[s] + task.source_suffixes[x];
      tgt += task.target_stems[s] + task.target_suffixes[x];
    }
    out.src.push_back(std::move(src));
    out.tgt.push_back(std::move(tgt));
  };
  for (std::size_t i = 0; i < cfg.train_pairs; ++i) sentence(seen, task.train);
  for (std::size_t i = 0; i < cfg.valid_pairs; ++i) sentence(all, task.valid);
  for (std::size_t i = 0; i < cfg.test_pairs; ++i) sentence(all, task.test);
  return task;
}

void write_toy_task(const ToyTask& task, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  write_lines(task.train.src, root / "train.src");
  write_lines(task.train.tgt, root / "train.tgt");
  write_lines(task.valid.src, root / "valid.src");
  write_lines(task.valid.tgt, root / "valid.tgt");
  write_lines(task.test.src, root / "test.src");
  write_lines(task.test.tgt, root / "test.tgt");
}

}  // namespace advsr
