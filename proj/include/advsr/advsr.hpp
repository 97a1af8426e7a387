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

// Adversarial subword regularization: per word, with probability R, replace
// the deterministic segmentation by the n-best candidate that maximizes the
// first-order loss increase  g_hat . (e_hat(cand) - e_hat(orig)),  where g is
// the mean input-embedding gradient over the word's original pieces and e the
// mean piece embedding, each L2-normalized. Gradients come from a single
// forward/backward pass on the deterministic segmentations of both sides.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advsr/lattice.hpp"
#include "advsr/model.hpp"
#include "advsr/rng.hpp"
#include "advsr/vocab.hpp"

namespace advsr {

struct WordGroup {
  std::size_t word_index = 0;
  std::size_t begin = 0;  // into the segmentation's piece ids
  std::size_t end = 0;
  std::string word_text;  // surface text without the boundary marker
};

// One group per marker-initiated span, in order. Throws advsr::Error when the
// first piece does not carry the boundary marker.
std::vector<WordGroup> group_words(const SubwordVocab& vocab, std::span<const int> piece_ids);
std::vector<WordGroup> group_words(const SubwordVocab& vocab, const Segmentation& seg);

// Element-wise mean. Throws advsr::Error for an empty list or ragged input.
std::vector<double> aggregate(std::span<const std::span<const double>> vectors);

// g_hat . (cand_hat - orig_hat) with each vector scaled to unit L2 norm
// (zero vectors stay zero).
double score_candidate(std::span<const double> word_grad, std::span<const double> cand_emb,
                       std::span<const double> orig_emb);

struct AdvConfig {
  double R = 0.25;
  std::size_t n_candidates = 9;
  bool perturb_source = true;
  bool perturb_target = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// What AdvSR needs from a translation model: one gradient pass and the
// embedding rows. ParamsModel adapts ModelParams.
class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;
  virtual int vocab_size() const = 0;
  virtual GradientBundle gradients(std::span<const int> src, std::span<const int> tgt) const = 0;
  virtual std::span<const double> src_embedding(int id) const = 0;
  virtual std::span<const double> tgt_embedding(int id) const = 0;
};

class ParamsModel final : public EmbeddingModel {
 public:
  explicit ParamsModel(const ModelParams& params) : params_(&params) {}
  int vocab_size() const override { return params_->config().vocab_size; }
  GradientBundle gradients(std::span<const int> src, std::span<const int> tgt) const override {
    return loss_and_embedding_grads(*params_, src, tgt);
  }
  std::span<const double> src_embedding(int id) const override { return params_->src_embedding(id); }
  std::span<const double> tgt_embedding(int id) const override { return params_->tgt_embedding(id); }

 private:
  const ModelParams* params_;
};

struct WordChoice {
  std::size_t word_index = 0;
  bool attempted = false;     // r < R was drawn for this word
  std::size_t chosen = 0;     // index into the word's candidate list
  std::size_t candidates = 0;
  std::vector<double> scores;  // per candidate; empty when not attempted
};

struct AdvSide {
  Segmentation original;
  Segmentation adversarial;
  std::vector<WordChoice> words;
};

struct AdvResult {
  AdvSide source;
  AdvSide target;
  double loss = 0.0;  // loss on the deterministic segmentations
};

AdvResult advsr_sample(const EmbeddingModel& model, LatticeCache& cache, std::string_view source,
                       std::string_view target, const AdvConfig& cfg, Rng& rng);
AdvResult advsr_sample(const ModelParams& model, const SubwordVocab& vocab,
                       std::string_view source, std::string_view target, const AdvConfig& cfg,
                       Rng& rng);

}  // namespace advsr
