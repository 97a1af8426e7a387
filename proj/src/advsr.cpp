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

#include "advsr/advsr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "advsr/error.hpp"
#include "advsr/kernels.hpp"
#include "advsr/utf8.hpp"

namespace advsr {

std::vector<WordGroup> group_words(const SubwordVocab& vocab, std::span<const int> piece_ids) {
  std::vector<WordGroup> groups;
  for (std::size_t i = 0; i < piece_ids.size(); ++i) {
    const int id = piece_ids[i];
    if (vocab.starts_word(id)) {
      WordGroup g;
      g.word_index = groups.size();
      g.begin = i;
      g.end = i + 1;
      groups.push_back(std::move(g));
    } else if (groups.empty()) {
      throw Error("group_words: first piece does not start with the boundary marker");
    } else {
      groups.back().end = i + 1;
    }
  }
  for (auto& g : groups) {
    g.word_text = detokenize(vocab, piece_ids.subspan(g.begin, g.end - g.begin));
  }
  return groups;
}

std::vector<WordGroup> group_words(const SubwordVocab& vocab, const Segmentation& seg) {
  return group_words(vocab, std::span<const int>(seg.piece_ids));
}

std::vector<double> aggregate(std::span<const std::span<const double>> vectors) {
  if (vectors.empty()) throw Error("aggregate: no vectors");
  const std::size_t d = vectors.front().size();
  std::vector<double> out(d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw Error("aggregate: vectors differ in dimension");
    kernels::add(v, out);
  }
  kernels::scale(1.0 / static_cast<double>(vectors.size()), out);
  return out;
}

double score_candidate(std::span<const double> word_grad, std::span<const double> cand_emb,
                       std::span<const double> orig_emb) {
  const std::size_t d = word_grad.size();
  if (cand_emb.size() != d || orig_emb.size() != d) throw Error("score_candidate: dimension mismatch");
  auto inv_norm = [](std::span<const double> v) {
    const double n = std::sqrt(kernels::dot(v, v));
    return n > 0.0 ? 1.0 / n : 0.0;
  };
  const double ig = inv_norm(word_grad);
  const double ic = inv_norm(cand_emb);
  const double io = inv_norm(orig_emb);
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    s += word_grad[k] * ig * (cand_emb[k] * ic - orig_emb[k] * io);
  }
  return s;
}

void AdvConfig::validate() const {
  if (!(R >= 0.0 && R <= 1.0)) throw Error("advsr: R must be in [0, 1]");
  if (n_candidates < 1) throw Error("advsr: n_candidates must be at least 1");
}

namespace {

using EmbeddingRow = std::function<std::span<const double>(int)>;

// Summed in sorted id order so candidates that permute the same pieces get
// bit-identical means and tie exactly.
std::vector<double> mean_embedding(std::span<const int> ids, const EmbeddingRow& row) {
  std::vector<int> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::span<const double>> rows;
  rows.reserve(sorted.size());
  for (int id : sorted) rows.push_back(row(id));
  return aggregate(rows);
}

AdvSide perturb_side(LatticeCache& cache, std::string_view sentence, const Segmentation& original,
                     const Matrix& grads, const EmbeddingRow& row, const AdvConfig& cfg, Rng& rng) {
  const auto words = utf8::split_words(sentence);
  const auto groups = group_words(cache.vocab(), original);
  if (groups.size() != words.size()) throw Error("advsr: word grouping does not match the sentence");
  AdvSide side;
  side.original = original;
  for (const WordGroup& g : groups) {
    const std::span<const int> orig(original.piece_ids.data() + g.begin, g.end - g.begin);
    WordChoice choice;
    choice.word_index = g.word_index;
    const double r = rng.uniform();
    choice.attempted = r < cfg.R;
    if (!choice.attempted) {
      side.adversarial.append_word(orig);
      side.words.push_back(std::move(choice));
      continue;
    }
    const WordLattice& lat = cache.nbest(words[g.word_index], cfg.n_candidates);
    std::vector<std::span<const int>> cands;
    const bool has_original = std::any_of(lat.candidates.begin(), lat.candidates.end(),
                                          [&](const auto& c) { return std::ranges::equal(c, orig); });
    if (!has_original) cands.push_back(orig);
    for (const auto& c : lat.candidates) cands.push_back(c);
    choice.candidates = cands.size();

    std::vector<std::span<const double>> grad_rows;
    for (std::size_t k = g.begin; k < g.end; ++k) grad_rows.push_back(grads.row(k));
    const auto word_grad = aggregate(grad_rows);
    const auto orig_emb = mean_embedding(orig, row);
    std::size_t best = 0;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double s = score_candidate(word_grad, mean_embedding(cands[c], row), orig_emb);
      choice.scores.push_back(s);
      if (s > choice.scores[best]) best = c;
    }
    choice.chosen = best;
    side.adversarial.append_word(cands[best]);
    side.words.push_back(std::move(choice));
  }
  return side;
}

AdvSide keep_side(const Segmentation& original) {
  AdvSide side;
  side.original = original;
  side.adversarial = original;
  for (std::size_t j = 0; j < original.num_words(); ++j) {
    WordChoice c;
    c.word_index = j;
    side.words.push_back(c);
  }
  return side;
}

}  // namespace

AdvResult advsr_sample(const EmbeddingModel& model, LatticeCache& cache, std::string_view source,
                       std::string_view target, const AdvConfig& cfg, Rng& rng) {
  cfg.validate();
  if (static_cast<std::size_t>(model.vocab_size()) != cache.vocab().size()) {
    throw Error("advsr: model and vocab sizes differ");
  }
  const Segmentation x = viterbi_segment(cache, source);
  const Segmentation y = viterbi_segment(cache, target);
  if (x.piece_ids.empty() || y.piece_ids.empty()) throw Error("advsr: empty sentence");
  const GradientBundle bundle = model.gradients(x.piece_ids, y.piece_ids);
  AdvResult result;
  result.loss = bundle.loss;
  result.source = cfg.perturb_source
                      ? perturb_side(cache, source, x, bundle.src_grads,
                                     [&](int id) { return model.src_embedding(id); }, cfg, rng)
                      : keep_side(x);
  result.target = cfg.perturb_target
                      ? perturb_side(cache, target, y, bundle.tgt_grads,
                                     [&](int id) { return model.tgt_embedding(id); }, cfg, rng)
                      : keep_side(y);
  return result;
}

AdvResult advsr_sample(const ModelParams& model, const SubwordVocab& vocab,
                       std::string_view source, std::string_view target, const AdvConfig& cfg,
                       Rng& rng) {
  LatticeCache cache(vocab);
  return advsr_sample(ParamsModel(model), cache, source, target, cfg, rng);
}

}  // namespace advsr
