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

#include "advsr/lattice.hpp"

#include <cmath>

#include "advsr/error.hpp"
#include "advsr/utf8.hpp"
#include "lattice_core.hpp"

namespace advsr {

void Segmentation::append_word(std::span<const int> fragment) {
  const std::size_t begin = piece_ids.size();
  piece_ids.insert(piece_ids.end(), fragment.begin(), fragment.end());
  word_spans.emplace_back(begin, piece_ids.size());
}

std::string marked_word(const SubwordVocab& vocab, std::string_view word) {
  std::string out = vocab.marker();
  out += word;
  return out;
}

namespace {

lattice_core::Graph word_graph(const SubwordVocab& vocab, std::string_view marked) {
  const auto chars = utf8::split_chars(marked);
  return lattice_core::build_graph(
      chars, vocab.max_piece_chars(),
      [&vocab](std::string_view piece) -> std::optional<std::pair<int, double>> {
        auto id = vocab.id_of(piece);
        if (!id || SubwordVocab::is_reserved(*id)) return std::nullopt;
        return std::make_pair(*id, vocab.log_prob(*id));
      },
      SubwordVocab::kUnkId, vocab.unk_log_prob());
}

}  // namespace

std::vector<int> viterbi_word(const SubwordVocab& vocab, std::string_view word) {
  const auto graph = word_graph(vocab, marked_word(vocab, word));
  auto paths = lattice_core::kbest(graph, 1);
  return std::move(paths.front().ids);
}

Segmentation viterbi_segment(const SubwordVocab& vocab, std::string_view sentence) {
  Segmentation seg;
  for (std::string_view w : utf8::split_words(sentence)) seg.append_word(viterbi_word(vocab, w));
  return seg;
}

WordLattice nbest_candidates(const SubwordVocab& vocab, std::string_view word, std::size_t n) {
  if (n == 0) throw Error("nbest_candidates: n must be at least 1");
  if (word.empty()) throw Error("nbest_candidates: empty word");
  const auto graph = word_graph(vocab, marked_word(vocab, word));
  auto paths = lattice_core::kbest(graph, n);
  WordLattice lat;
  lat.word = std::string(word);
  lat.candidates.reserve(paths.size());
  lat.log_probs.reserve(paths.size());
  for (auto& p : paths) {
    lat.log_probs.push_back(p.score);
    lat.candidates.push_back(std::move(p.ids));
  }
  return lat;
}

double fragment_log_prob(const SubwordVocab& vocab, std::span<const int> fragment) {
  double s = 0.0;
  for (int id : fragment) s += vocab.log_prob(id);
  return s;
}

const WordLattice& LatticeCache::nbest(std::string_view word, std::size_t n) {
  std::string key(word);
  key += '\x1f';
  key += std::to_string(n);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    it = entries_.emplace(std::move(key), nbest_candidates(*vocab_, word, n)).first;
  }
  return it->second;
}

std::size_t sample_candidate_index(const WordLattice& lattice, double alpha, Rng& rng) {
  const std::size_t n = lattice.candidates.size();
  if (n <= 1 || std::isinf(alpha)) return 0;
  const double top = lattice.log_probs.front();
  std::vector<double> weights(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = std::exp(alpha * (lattice.log_probs[i] - top));
    total += weights[i];
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return n - 1;
}

Segmentation sample_segmentation(LatticeCache& cache, std::string_view sentence, double alpha,
                                 std::size_t l, Rng& rng) {
  if (l == 0) throw Error("sample_segmentation: l must be at least 1");
  if (alpha < 0.0 || std::isnan(alpha)) throw Error("sample_segmentation: alpha must be >= 0");
  Segmentation seg;
  for (std::string_view w : utf8::split_words(sentence)) {
    const WordLattice& lat = cache.nbest(w, l);
    seg.append_word(lat.candidates[sample_candidate_index(lat, alpha, rng)]);
  }
  return seg;
}

Segmentation sample_segmentation(const SubwordVocab& vocab, std::string_view sentence,
                                 double alpha, std::size_t l, Rng& rng) {
  LatticeCache cache(vocab);
  return sample_segmentation(cache, sentence, alpha, l, rng);
}

Segmentation viterbi_segment(LatticeCache& cache, std::string_view sentence) {
  Segmentation seg;
  for (std::string_view w : utf8::split_words(sentence)) {
    seg.append_word(cache.nbest(w, 1).candidates.front());
  }
  return seg;
}

std::string detokenize(const SubwordVocab& vocab, std::span<const int> piece_ids) {
  std::string out;
  for (int id : piece_ids) {
    if (id == SubwordVocab::kUnkId) {
      out += "\xE2\x81\x87";
    } else if (SubwordVocab::is_reserved(id)) {
      continue;
    } else {
      const std::string& p = vocab.piece(id);
      if (p.starts_with(vocab.marker())) {
        if (!out.empty()) out += ' ';
        out.append(p, vocab.marker().size());
      } else {
        out += p;
      }
    }
  }
  return out;
}

std::vector<std::string> piece_strings(const SubwordVocab& vocab, std::span<const int> piece_ids) {
  std::vector<std::string> out;
  out.reserve(piece_ids.size());
  for (int id : piece_ids) out.push_back(vocab.piece(id));
  return out;
}

Segmentation segmentation_from_ids(const SubwordVocab& vocab, std::vector<int> piece_ids) {
  Segmentation seg;
  for (std::size_t i = 0; i < piece_ids.size(); ++i) {
    if (vocab.starts_word(piece_ids[i])) {
      seg.word_spans.emplace_back(i, i + 1);
    } else if (seg.word_spans.empty()) {
      throw Error("segmentation does not start with a word-initial piece");
    } else {
      seg.word_spans.back().second = i + 1;
    }
  }
  seg.piece_ids = std::move(piece_ids);
  return seg;
}

}  // namespace advsr
