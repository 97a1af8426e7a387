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

#include "advsr/vocab_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "advsr/error.hpp"
#include "advsr/utf8.hpp"
#include "lattice_core.hpp"

namespace advsr {
namespace unigram_em {
namespace {

using Index = std::unordered_map<std::string_view, int>;

Index make_index(const PieceSet& set) {
  Index idx;
  idx.reserve(set.pieces.size());
  for (std::size_t i = 0; i < set.pieces.size(); ++i) idx.emplace(set.pieces[i], static_cast<int>(i));
  return idx;
}

int max_chars(const PieceSet& set) {
  int m = 1;
  for (const auto& p : set.pieces) m = std::max(m, static_cast<int>(utf8::char_count(p)));
  return m;
}

lattice_core::Graph graph_for(const PieceSet& set, const Index& idx, int max_len,
                              std::string_view text, double unk_log_prob, int skip = -1) {
  return lattice_core::build_graph(
      utf8::split_chars(text), max_len,
      [&](std::string_view piece) -> std::optional<std::pair<int, double>> {
        auto it = idx.find(piece);
        if (it == idx.end() || it->second == skip) return std::nullopt;
        return std::make_pair(it->second, set.log_probs[static_cast<std::size_t>(it->second)]);
      },
      -1, unk_log_prob);
}

}  // namespace

std::vector<double> expected_counts(const PieceSet& set, std::span<const WordCount> words,
                                    double unk_log_prob, double* log_likelihood) {
  const Index idx = make_index(set);
  const int max_len = max_chars(set);
  std::vector<double> counts(set.pieces.size(), 0.0);
  double ll = 0.0;
  for (const WordCount& w : words) {
    const auto g = graph_for(set, idx, max_len, w.text, unk_log_prob);
    ll += w.count * lattice_core::forward_backward(g, [&](const lattice_core::Edge& e, double post) {
      if (e.id >= 0) counts[static_cast<std::size_t>(e.id)] += w.count * post;
    });
  }
  if (log_likelihood != nullptr) *log_likelihood = ll;
  return counts;
}

std::vector<double> m_step(std::span<const double> counts) {
  std::vector<double> out(counts.size());
  double total = 0.0;
  for (double c : counts) total += std::max(c, kMinExpectedCount);
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = std::log(std::max(counts[i], kMinExpectedCount)) - log_total;
  }
  return out;
}

void em_iteration(PieceSet& set, std::span<const WordCount> words, double unk_log_prob) {
  set.log_probs = m_step(expected_counts(set, words, unk_log_prob));
}

namespace {

void renormalize(std::vector<double>& log_probs) {
  double lse = -std::numeric_limits<double>::infinity();
  for (double lp : log_probs) lse = lattice_core::log_add(lse, lp);
  for (double& lp : log_probs) lp = std::min(0.0, lp - lse);
}

// Drops the non-required pieces whose removal costs the least likelihood,
// keeping `keep` pieces in total.
void prune(PieceSet& set, std::span<const WordCount> words, double unk_log_prob, std::size_t keep) {
  const Index idx = make_index(set);
  const int max_len = max_chars(set);
  const std::size_t n = set.pieces.size();

  // Viterbi usage frequencies.
  std::vector<double> freq(n, 0.0);
  for (const WordCount& w : words) {
    const auto g = graph_for(set, idx, max_len, w.text, unk_log_prob);
    const auto best = lattice_core::kbest(g, 1);
    for (int id : best.front().ids) {
      if (id >= 0) freq[static_cast<std::size_t>(id)] += w.count;
    }
  }
  const double vsum = std::accumulate(freq.begin(), freq.end(), 0.0);
  const double log_vsum = std::log(vsum);

  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; ++i) {
    if (set.required[i]) continue;
    double loss = 0.0;
    if (freq[i] > 0.0) {
      // Best segmentation of the piece itself without using the piece.
      const auto g = graph_for(set, idx, max_len, set.pieces[i], unk_log_prob, static_cast<int>(i));
      const auto alt = lattice_core::kbest(g, 1).front().ids;
      const double logprob_sp = std::log(freq[i]) - log_vsum;
      const double logsum_alt =
          std::log(vsum + freq[i] * (static_cast<double>(alt.size()) - 1.0));
      double logprob_alt = 0.0;
      for (int id : alt) {
        const double f = id >= 0 ? freq[static_cast<std::size_t>(id)] : 0.0;
        logprob_alt += std::log(f + freq[i]) - logsum_alt;
      }
      loss = (freq[i] / vsum) * (logprob_sp - logprob_alt);
    }
    ranked.emplace_back(loss, i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return set.pieces[a.second] < set.pieces[b.second];
  });
  std::size_t required = 0;
  for (bool r : set.required) required += r ? 1 : 0;
  const std::size_t keep_optional = keep > required ? keep - required : 0;

  std::vector<bool> kept(set.required);
  for (std::size_t r = 0; r < ranked.size() && r < keep_optional; ++r) kept[ranked[r].second] = true;
  PieceSet next;
  for (std::size_t i = 0; i < n; ++i) {
    if (!kept[i]) continue;
    next.pieces.push_back(std::move(set.pieces[i]));
    next.log_probs.push_back(set.log_probs[i]);
    next.required.push_back(set.required[i]);
  }
  renormalize(next.log_probs);
  set = std::move(next);
}

}  // namespace
}  // namespace unigram_em

SubwordVocab train_vocab(std::span<const std::string> corpus, const VocabTrainConfig& cfg) {
  using namespace unigram_em;
  if (corpus.empty()) throw Error("train_vocab: corpus is empty");
  if (!(cfg.prune_fraction > 0.0 && cfg.prune_fraction < 1.0)) {
    throw Error("train_vocab: prune_fraction must be in (0, 1)");
  }
  if (!(cfg.char_coverage > 0.0 && cfg.char_coverage <= 1.0)) {
    throw Error("train_vocab: char_coverage must be in (0, 1]");
  }
  if (cfg.max_piece_len == 0) throw Error("train_vocab: max_piece_len must be positive");
  const std::string marker(kBoundaryMarker);

  // Word frequencies; std::map keeps everything independent of sentence order.
  std::map<std::string, double> word_freq;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto words = utf8::split_words(corpus[s]);
    if (words.empty()) throw Error("train_vocab: sentence " + std::to_string(s + 1) + " is empty");
    for (std::string_view w : words) word_freq[marker + std::string(w)] += 1.0;
  }

  // Character coverage.
  std::map<std::string, double> char_freq;
  double char_total = 0.0;
  for (const auto& [w, f] : word_freq) {
    const auto chars = utf8::split_chars(w);
    for (std::size_t i = 1; i < chars.size(); ++i) {
      char_freq[std::string(chars[i])] += f;
      char_total += f;
    }
  }
  std::vector<std::pair<std::string, double>> chars_ranked(char_freq.begin(), char_freq.end());
  std::stable_sort(chars_ranked.begin(), chars_ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, double> covered;
  covered[marker] = 0.0;
  for (const auto& [w, f] : word_freq) covered[marker] += f;
  double acc = 0.0;
  for (const auto& [c, f] : chars_ranked) {
    if (acc >= cfg.char_coverage * char_total) break;
    covered[c] = f;
    acc += f;
  }
  if (cfg.target_size < covered.size() + SubwordVocab::kNumReserved) {
    throw Error("train_vocab: target_size " + std::to_string(cfg.target_size) +
                " is smaller than the alphabet (" + std::to_string(covered.size()) +
                " characters) plus reserved pieces");
  }

  // Seed substrings of in-coverage characters, ranked by frequency x length.
  std::map<std::string, double> sub_freq;
  for (const auto& [w, f] : word_freq) {
    const auto chars = utf8::split_chars(w);
    for (std::size_t i = 0; i < chars.size(); ++i) {
      if (!covered.contains(std::string(chars[i]))) continue;
      std::string piece(chars[i]);
      for (std::size_t len = 2; len <= cfg.max_piece_len && i + len <= chars.size(); ++len) {
        const std::string_view c = chars[i + len - 1];
        if (!covered.contains(std::string(c))) break;
        piece += c;
        sub_freq[piece] += f;
      }
    }
  }
  std::vector<std::pair<std::string, double>> seeds;
  seeds.reserve(sub_freq.size());
  for (auto& [p, f] : sub_freq) seeds.emplace_back(p, f * static_cast<double>(utf8::char_count(p)));
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t seed_budget = cfg.seed_multiplier * cfg.target_size;
  const std::size_t max_seeds = seed_budget > covered.size() ? seed_budget - covered.size() : 0;
  if (seeds.size() > max_seeds) seeds.resize(max_seeds);

  PieceSet set;
  for (const auto& [c, f] : covered) {
    set.pieces.push_back(c);
    set.log_probs.push_back(f);
    set.required.push_back(true);
  }
  for (const auto& [p, score] : seeds) {
    set.pieces.push_back(p);
    set.log_probs.push_back(sub_freq[p]);
    set.required.push_back(false);
  }
  {
    double total = 0.0;
    for (double f : set.log_probs) total += f;
    for (double& f : set.log_probs) f = std::log(f / total);
  }

  std::vector<WordCount> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) words.push_back({w, f});

  const std::size_t target_normal = cfg.target_size - SubwordVocab::kNumReserved;
  for (;;) {
    for (std::size_t it = 0; it < cfg.em_iterations; ++it) em_iteration(set, words, cfg.unk_log_prob);
    if (set.pieces.size() <= target_normal) break;
    const auto shrunk = static_cast<std::size_t>(
        std::floor(static_cast<double>(set.pieces.size()) * (1.0 - cfg.prune_fraction)));
    prune(set, words, cfg.unk_log_prob, std::max(target_normal, shrunk));
  }

  std::vector<std::size_t> order(set.pieces.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (set.log_probs[a] != set.log_probs[b]) return set.log_probs[a] > set.log_probs[b];
    return set.pieces[a] < set.pieces[b];
  });
  std::vector<Piece> pieces;
  pieces.reserve(order.size());
  for (std::size_t i : order) pieces.push_back({set.pieces[i], std::min(0.0, set.log_probs[i])});
  VocabMeta meta;
  meta.char_coverage = cfg.char_coverage;
  return SubwordVocab::from_normal_pieces(std::move(pieces), std::move(meta), cfg.unk_log_prob);
}

}  // namespace advsr
