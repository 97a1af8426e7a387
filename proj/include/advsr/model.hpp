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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advsr/matrix.hpp"

namespace advsr {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int heads = 2;
  int ffn_dim = 128;
  int encoder_layers = 1;
  int decoder_layers = 1;
  // Longest accepted source or target sequence (pieces, before bos/eos).
  int max_len = 256;
  bool positions = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// A contiguous slice of the flat parameter vector.
struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct LinearSlot {
  std::size_t w = 0;  // in x out, row-major
  std::size_t b = 0;
  int in = 0;
  int out = 0;
};
struct NormSlot {
  std::size_t gain = 0;
  std::size_t bias = 0;
};
struct AttentionSlot {
  LinearSlot q, k, v, o;
};
struct EncoderLayerSlot {
  NormSlot ln1;
  AttentionSlot self;
  NormSlot ln2;
  LinearSlot ff1, ff2;
};
struct DecoderLayerSlot {
  NormSlot ln1;
  AttentionSlot self;
  NormSlot ln2;
  AttentionSlot cross;
  NormSlot ln3;
  LinearSlot ff1, ff2;
};

struct ParamLayout {
  std::size_t src_embed = 0;
  std::size_t tgt_embed = 0;
  std::vector<EncoderLayerSlot> encoder;
  NormSlot encoder_norm;
  std::vector<DecoderLayerSlot> decoder;
  NormSlot decoder_norm;
  LinearSlot output;
  std::vector<ParamGroup> groups;
  std::size_t total = 0;

  static ParamLayout build(const ModelConfig& cfg);
};

// Parameters of the attention encoder-decoder. Source and target have their
// own |V| x d embedding tables over the shared vocabulary ids.
class ModelParams {
 public:
  // All-zero parameters except layer-norm gains (1).
  explicit ModelParams(const ModelConfig& cfg);
  // Xavier-uniform projections, N(0, 1) embeddings, deterministic in seed.
  static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> src_embedding(int id) const;
  std::span<const double> tgt_embedding(int id) const;
  std::span<double> group(const std::string& name);

  bool operator==(const ModelParams& o) const { return cfg_ == o.cfg_ && values_ == o.values_; }

 private:
  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<double> values_;
};

// Loss and per-occurrence input-embedding gradients from one forward/backward
// pass. src_grads row k is d loss / d e(src_k); tgt_grads row k is
// d loss / d e(tgt_k) where tgt_k is fed to the decoder at step k + 1.
struct GradientBundle {
  double loss = 0.0;
  Matrix src_grads;
  Matrix tgt_grads;
};

// Token-mean cross-entropy of the teacher-forced target (tgt followed by eos,
// decoder input bos followed by tgt). Throws advsr::Error on empty or
// over-long sequences and out-of-range ids.
GradientBundle loss_and_embedding_grads(const ModelParams& p, std::span<const int> src,
                                        std::span<const int> tgt);
double compute_loss(const ModelParams& p, std::span<const int> src, std::span<const int> tgt);

// Same loss evaluated on explicit input vectors in place of the embedding
// lookups (rows align with src and tgt). Used for finite-difference checks.
double loss_from_vectors(const ModelParams& p, const Matrix& src_vectors,
                         const Matrix& tgt_vectors, std::span<const int> tgt);

// Forward + backward that adds weight * d loss / d theta into param_grads
// (sized like p.values()) and optionally fills `bundle`. Returns the loss.
double accumulate_gradients(const ModelParams& p, std::span<const int> src,
                            std::span<const int> tgt, double weight,
                            std::span<double> param_grads, GradientBundle* bundle = nullptr);

// Teacher-forced log-probabilities of each token of `output` (which should
// include the final eos when one was generated).
std::vector<double> token_log_probs(const ModelParams& p, std::span<const int> src,
                                    std::span<const int> output);

struct DecodeResult {
  std::vector<int> ids;  // without eos
  double log_prob = 0.0;
  // log_prob / number of generated tokens (including eos when present).
  double score = 0.0;
  bool finished = false;  // ended in eos rather than hitting max_len
};

// Beam search returning the completed hypothesis with the highest
// length-normalized log-probability. <pad> and <s> are never generated.
DecodeResult beam_decode(const ModelParams& p, std::span<const int> src, std::size_t beam = 4,
                         std::size_t max_len = 64);

}  // namespace advsr
