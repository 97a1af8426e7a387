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

#include "advsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "advsr/error.hpp"
#include "advsr/kernels.hpp"
#include "advsr/rng.hpp"
#include "advsr/vocab.hpp"

namespace advsr {

void ModelConfig::validate() const {
  if (vocab_size <= SubwordVocab::kNumReserved) throw Error("model: vocab_size too small");
  if (d_model < 2) throw Error("model: d_model must be at least 2");
  if (heads < 1 || d_model % heads != 0) throw Error("model: heads must divide d_model");
  if (ffn_dim < 1) throw Error("model: ffn_dim must be positive");
  if (encoder_layers < 1 || decoder_layers < 1) throw Error("model: need at least one layer");
  if (max_len < 1) throw Error("model: max_len must be positive");
}

ParamLayout ParamLayout::build(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout L;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto v = static_cast<std::size_t>(cfg.vocab_size);
  std::size_t off = 0;
  auto take = [&](const std::string& name, std::size_t n) {
    L.groups.push_back({name, off, n});
    const std::size_t at = off;
    off += n;
    return at;
  };
  auto linear = [&](const std::string& name, int in, int out) {
    LinearSlot s;
    s.in = in;
    s.out = out;
    s.w = take(name + ".w", static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    s.b = take(name + ".b", static_cast<std::size_t>(out));
    return s;
  };
  auto norm = [&](const std::string& name) {
    NormSlot s;
    s.gain = take(name + ".gain", d);
    s.bias = take(name + ".bias", d);
    return s;
  };
  auto attention = [&](const std::string& name) {
    AttentionSlot s;
    s.q = linear(name + ".q", cfg.d_model, cfg.d_model);
    s.k = linear(name + ".k", cfg.d_model, cfg.d_model);
    s.v = linear(name + ".v", cfg.d_model, cfg.d_model);
    s.o = linear(name + ".o", cfg.d_model, cfg.d_model);
    return s;
  };
  L.src_embed = take("src_embed", v * d);
  L.tgt_embed = take("tgt_embed", v * d);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    EncoderLayerSlot s;
    s.ln1 = norm(p + ".ln1");
    s.self = attention(p + ".self");
    s.ln2 = norm(p + ".ln2");
    s.ff1 = linear(p + ".ff1", cfg.d_model, cfg.ffn_dim);
    s.ff2 = linear(p + ".ff2", cfg.ffn_dim, cfg.d_model);
    L.encoder.push_back(s);
  }
  L.encoder_norm = norm("enc.norm");
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    DecoderLayerSlot s;
    s.ln1 = norm(p + ".ln1");
    s.self = attention(p + ".self");
    s.ln2 = norm(p + ".ln2");
    s.cross = attention(p + ".cross");
    s.ln3 = norm(p + ".ln3");
    s.ff1 = linear(p + ".ff1", cfg.d_model, cfg.ffn_dim);
    s.ff2 = linear(p + ".ff2", cfg.ffn_dim, cfg.d_model);
    L.decoder.push_back(s);
  }
  L.decoder_norm = norm("dec.norm");
  L.output = linear("out", cfg.d_model, cfg.vocab_size);
  L.total = off;
  return L;
}

namespace {

void set_norm_gains(std::vector<double>& values, const ParamLayout& L, std::size_t d) {
  auto ones = [&](const NormSlot& s) { std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(s.gain), d, 1.0); };
  for (const auto& e : L.encoder) {
    ones(e.ln1);
    ones(e.ln2);
  }
  ones(L.encoder_norm);
  for (const auto& e : L.decoder) {
    ones(e.ln1);
    ones(e.ln2);
    ones(e.ln3);
  }
  ones(L.decoder_norm);
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& cfg)
    : cfg_(cfg), layout_(ParamLayout::build(cfg)), values_(layout_.total, 0.0) {
  set_norm_gains(values_, layout_, static_cast<std::size_t>(cfg.d_model));
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p(cfg);
  Rng rng(seed);
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto v = static_cast<std::size_t>(cfg.vocab_size);
  for (std::size_t i = 0; i < 2 * v * d; ++i) p.values_[p.layout_.src_embed + i] = rng.normal();
  auto xavier = [&](const LinearSlot& s) {
    const double a = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    const auto n = static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
    for (std::size_t i = 0; i < n; ++i) p.values_[s.w + i] = (2.0 * rng.uniform() - 1.0) * a;
  };
  auto attention = [&](const AttentionSlot& s) {
    xavier(s.q);
    xavier(s.k);
    xavier(s.v);
    xavier(s.o);
  };
  for (const auto& e : p.layout_.encoder) {
    attention(e.self);
    xavier(e.ff1);
    xavier(e.ff2);
  }
  for (const auto& e : p.layout_.decoder) {
    attention(e.self);
    attention(e.cross);
    xavier(e.ff1);
    xavier(e.ff2);
  }
  xavier(p.layout_.output);
  return p;
}

std::span<const double> ModelParams::src_embedding(int id) const {
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  return std::span<const double>(values_).subspan(layout_.src_embed + static_cast<std::size_t>(id) * d, d);
}

std::span<const double> ModelParams::tgt_embedding(int id) const {
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  return std::span<const double>(values_).subspan(layout_.tgt_embed + static_cast<std::size_t>(id) * d, d);
}

std::span<double> ModelParams::group(const std::string& name) {
  for (const auto& g : layout_.groups) {
    if (g.name == name) return std::span<double>(values_).subspan(g.offset, g.size);
  }
  throw Error("model: no parameter group " + name);
}

namespace {

constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Row-level primitives. Full-sequence and incremental decoding both go through
// these, so they produce bit-identical numbers.

struct Weights {
  const double* base;
  std::span<const double> at(std::size_t off, std::size_t n) const { return {base + off, n}; }
};

void linear_row(const Weights& w, const LinearSlot& s, std::span<const double> x, std::span<double> y) {
  const auto out = static_cast<std::size_t>(s.out);
  std::copy_n(w.base + s.b, out, y.begin());
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.in); ++p) {
    kernels::axpy(x[p], w.at(s.w + p * out, out), y);
  }
}

// Returns 1 / sqrt(var + eps); writes the normalized row into xhat.
double layer_norm_row(const Weights& w, const NormSlot& s, std::span<const double> x,
                      std::span<double> xhat, std::span<double> y) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  const double* g = w.base + s.gain;
  const double* b = w.base + s.bias;
  for (std::size_t i = 0; i < d; ++i) {
    xhat[i] = (x[i] - mean) * inv_std;
    y[i] = g[i] * xhat[i] + b[i];
  }
  return inv_std;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// One attention row for one head: probabilities over keys [0, count) and the
// weighted value sum accumulated into ctx.
void attend_row(std::span<const double> q, const Matrix& keys, const Matrix& values,
                std::size_t count, std::size_t head_off, std::size_t dh, double scale,
                std::span<double> probs, std::span<double> ctx) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) {
    probs[j] = kernels::dot(q, keys.row(j).subspan(head_off, dh)) * scale;
    top = std::max(top, probs[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    probs[j] = std::exp(probs[j] - top);
    z += probs[j];
  }
  const double inv = 1.0 / z;
  std::fill(ctx.begin(), ctx.end(), 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    probs[j] *= inv;
    kernels::axpy(probs[j], values.row(j).subspan(head_off, dh), ctx);
  }
}

void sinusoid_add(std::span<double> row, std::size_t pos) {
  const std::size_t d = row.size();
  for (std::size_t i = 0; i < d; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    row[i] += std::sin(static_cast<double>(pos) * freq);
    if (i + 1 < d) row[i + 1] += std::cos(static_cast<double>(pos) * freq);
  }
}

// ---------------------------------------------------------------------------
// Sequence-level layers with caches for the backward pass.

struct NormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

void norm_forward(const Weights& w, const NormSlot& s, const Matrix& x, Matrix& y, NormCache& c) {
  y.resize(x.rows, x.cols);
  c.xhat.resize(x.rows, x.cols);
  c.inv_std.assign(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) c.inv_std[i] = layer_norm_row(w, s, x.row(i), c.xhat.row(i), y.row(i));
}

// dx += d/dx; gain/bias grads when g is non-null.
void norm_backward(const Weights& w, const NormSlot& s, const NormCache& c, const Matrix& dy,
                   Matrix& dx, double* g) {
  const std::size_t d = dy.cols;
  const double* gain = w.base + s.gain;
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    auto dyr = dy.row(i);
    auto xh = c.xhat.row(i);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      dxhat[k] = dyr[k] * gain[k];
      mean_dxhat += dxhat[k];
      mean_dxhat_xhat += dxhat[k] * xh[k];
      if (g != nullptr) {
        g[s.gain + k] += dyr[k] * xh[k];
        g[s.bias + k] += dyr[k];
      }
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    auto dxr = dx.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      dxr[k] += c.inv_std[i] * (dxhat[k] - mean_dxhat - xh[k] * mean_dxhat_xhat);
    }
  }
}

void linear_forward(const Weights& w, const LinearSlot& s, const Matrix& x, Matrix& y) {
  y.resize(x.rows, static_cast<std::size_t>(s.out));
  for (std::size_t i = 0; i < x.rows; ++i) linear_row(w, s, x.row(i), y.row(i));
}

// dx += dy W^T (when dx non-null); weight/bias grads when g non-null.
void linear_backward(const Weights& w, const LinearSlot& s, const Matrix& x, const Matrix& dy,
                     Matrix* dx, double* g) {
  const auto in = static_cast<std::size_t>(s.in);
  const auto out = static_cast<std::size_t>(s.out);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    auto dyr = dy.row(i);
    if (dx != nullptr) {
      auto dxr = dx->row(i);
      for (std::size_t p = 0; p < in; ++p) dxr[p] += kernels::dot(dyr, w.at(s.w + p * out, out));
    }
    if (g != nullptr) {
      auto xr = x.row(i);
      for (std::size_t p = 0; p < in; ++p) {
        if (xr[p] != 0.0) kernels::axpy(xr[p], dyr, std::span<double>(g + s.w + p * out, out));
      }
      kernels::add(dyr, std::span<double>(g + s.b, out));
    }
  }
}

struct AttentionCache {
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, rows = queries, cols = keys
  Matrix ctx;
};

void attention_forward(const Weights& w, const AttentionSlot& s, int heads, const Matrix& xq,
                       const Matrix& xkv, bool causal, Matrix& out, AttentionCache& c) {
  linear_forward(w, s.q, xq, c.q);
  linear_forward(w, s.k, xkv, c.k);
  linear_forward(w, s.v, xkv, c.v);
  const std::size_t d = xq.cols;
  const std::size_t dh = d / static_cast<std::size_t>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.ctx.resize(xq.rows, d);
  c.probs.assign(static_cast<std::size_t>(heads), Matrix(xq.rows, xkv.rows));
  for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < xq.rows; ++i) {
      const std::size_t count = causal ? i + 1 : xkv.rows;
      attend_row(c.q.row(i).subspan(off, dh), c.k, c.v, count, off, dh, scale,
                 c.probs[h].row(i), c.ctx.row(i).subspan(off, dh));
    }
  }
  linear_forward(w, s.o, c.ctx, out);
}

void attention_backward(const Weights& w, const AttentionSlot& s, int heads, const Matrix& xq,
                        const Matrix& xkv, bool causal, const AttentionCache& c, const Matrix& dout,
                        Matrix& dxq, Matrix& dxkv, double* g) {
  const std::size_t d = xq.cols;
  const std::size_t dh = d / static_cast<std::size_t>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dctx(xq.rows, d);
  linear_backward(w, s.o, c.ctx, dout, &dctx, g);
  Matrix dq(xq.rows, d), dk(xkv.rows, d), dv(xkv.rows, d);
  std::vector<double> dp(xkv.rows);
  for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < xq.rows; ++i) {
      const std::size_t count = causal ? i + 1 : xkv.rows;
      auto pr = c.probs[h].row(i);
      auto dc = dctx.row(i).subspan(off, dh);
      double weighted = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        dp[j] = kernels::dot(dc, c.v.row(j).subspan(off, dh));
        weighted += pr[j] * dp[j];
        kernels::axpy(pr[j], dc, dv.row(j).subspan(off, dh));
      }
      auto qi = c.q.row(i).subspan(off, dh);
      auto dqi = dq.row(i).subspan(off, dh);
      for (std::size_t j = 0; j < count; ++j) {
        const double ds = pr[j] * (dp[j] - weighted) * scale;
        kernels::axpy(ds, c.k.row(j).subspan(off, dh), dqi);
        kernels::axpy(ds, qi, dk.row(j).subspan(off, dh));
      }
    }
  }
  linear_backward(w, s.q, xq, dq, &dxq, g);
  linear_backward(w, s.k, xkv, dk, &dxkv, g);
  linear_backward(w, s.v, xkv, dv, &dxkv, g);
}

struct FfnCache {
  Matrix pre, act;
};

void ffn_forward(const Weights& w, const LinearSlot& ff1, const LinearSlot& ff2, const Matrix& x,
                 Matrix& out, FfnCache& c) {
  linear_forward(w, ff1, x, c.pre);
  c.act = c.pre;
  for (double& v : c.act.data) v = gelu(v);
  linear_forward(w, ff2, c.act, out);
}

void ffn_backward(const Weights& w, const LinearSlot& ff1, const LinearSlot& ff2, const Matrix& x,
                  const FfnCache& c, const Matrix& dout, Matrix& dx, double* g) {
  Matrix dact(c.act.rows, c.act.cols);
  linear_backward(w, ff2, c.act, dout, &dact, g);
  for (std::size_t i = 0; i < dact.data.size(); ++i) dact.data[i] *= gelu_grad(c.pre.data[i]);
  linear_backward(w, ff1, x, dact, &dx, g);
}

void add_into(Matrix& y, const Matrix& x) { kernels::add(x.data, y.data); }

struct EncoderLayerCache {
  NormCache n1, n2;
  Matrix a, b, attn_out, ffn_out;
  AttentionCache attn;
  FfnCache ffn;
};

struct DecoderLayerCache {
  NormCache n1, n2, n3;
  Matrix a, b, e, self_out, cross_out, ffn_out;
  AttentionCache self, cross;
  FfnCache ffn;
};

// Full teacher-forced pass over one sentence pair.
class Pass {
 public:
  explicit Pass(const ModelParams& p) : w_{p.values().data()}, L_(p.layout()), cfg_(p.config()) {}

  // src_in: n x d input vectors; dec_in: T x d decoder inputs (bos + targets).
  double forward(const Matrix& src_in, const Matrix& dec_in, std::span<const int> labels) {
    // Encoder.
    enc_x_.assign(1, src_in);
    if (cfg_.positions) {
      for (std::size_t i = 0; i < src_in.rows; ++i) sinusoid_add(enc_x_[0].row(i), i);
    }
    enc_.assign(L_.encoder.size(), {});
    for (std::size_t l = 0; l < L_.encoder.size(); ++l) {
      const auto& s = L_.encoder[l];
      auto& c = enc_[l];
      Matrix x = enc_x_[l];
      norm_forward(w_, s.ln1, x, c.a, c.n1);
      attention_forward(w_, s.self, cfg_.heads, c.a, c.a, false, c.attn_out, c.attn);
      add_into(x, c.attn_out);
      norm_forward(w_, s.ln2, x, c.b, c.n2);
      ffn_forward(w_, s.ff1, s.ff2, c.b, c.ffn_out, c.ffn);
      add_into(x, c.ffn_out);
      enc_x_.push_back(std::move(x));
    }
    norm_forward(w_, L_.encoder_norm, enc_x_.back(), memory_, enc_norm_);

    // Decoder.
    dec_x_.assign(1, dec_in);
    if (cfg_.positions) {
      for (std::size_t i = 0; i < dec_in.rows; ++i) sinusoid_add(dec_x_[0].row(i), i);
    }
    dec_.assign(L_.decoder.size(), {});
    for (std::size_t l = 0; l < L_.decoder.size(); ++l) {
      const auto& s = L_.decoder[l];
      auto& c = dec_[l];
      Matrix x = dec_x_[l];
      norm_forward(w_, s.ln1, x, c.a, c.n1);
      attention_forward(w_, s.self, cfg_.heads, c.a, c.a, true, c.self_out, c.self);
      add_into(x, c.self_out);
      norm_forward(w_, s.ln2, x, c.b, c.n2);
      attention_forward(w_, s.cross, cfg_.heads, c.b, memory_, false, c.cross_out, c.cross);
      add_into(x, c.cross_out);
      norm_forward(w_, s.ln3, x, c.e, c.n3);
      ffn_forward(w_, s.ff1, s.ff2, c.e, c.ffn_out, c.ffn);
      add_into(x, c.ffn_out);
      dec_x_.push_back(std::move(x));
    }
    norm_forward(w_, L_.decoder_norm, dec_x_.back(), dec_out_, dec_norm_);

    // Output distribution and loss.
    const std::size_t T = dec_in.rows;
    const auto V = static_cast<std::size_t>(cfg_.vocab_size);
    probs_.resize(T, V);
    log_probs_.resize(T, V);
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      auto logits = probs_.row(t);
      linear_row(w_, L_.output, dec_out_.row(t), logits);
      const double top = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double v : logits) z += std::exp(v - top);
      const double log_z = top + std::log(z);
      auto lp = log_probs_.row(t);
      for (std::size_t k = 0; k < V; ++k) {
        lp[k] = logits[k] - log_z;
        logits[k] = std::exp(lp[k]);
      }
      if (!labels.empty()) loss -= lp[static_cast<std::size_t>(labels[t])];
    }
    return labels.empty() ? 0.0 : loss / static_cast<double>(T);
  }

  // Gradients of the token-mean loss scaled by `weight`. d_src / d_dec receive
  // the gradients w.r.t. the input vectors; g (nullable) the parameter grads.
  void backward(std::span<const int> labels, double weight, Matrix& d_src, Matrix& d_dec, double* g) {
    const std::size_t T = dec_out_.rows;
    const auto V = static_cast<std::size_t>(cfg_.vocab_size);
    const double inv_t = weight / static_cast<double>(T);
    Matrix dlogits(T, V);
    for (std::size_t t = 0; t < T; ++t) {
      auto dl = dlogits.row(t);
      auto pr = probs_.row(t);
      for (std::size_t k = 0; k < V; ++k) dl[k] = pr[k] * inv_t;
      dl[static_cast<std::size_t>(labels[t])] -= inv_t;
    }
    Matrix d_dec_out(T, dec_out_.cols);
    linear_backward(w_, L_.output, dec_out_, dlogits, &d_dec_out, g);

    Matrix dx(T, dec_out_.cols);
    norm_backward(w_, L_.decoder_norm, dec_norm_, d_dec_out, dx, g);
    Matrix d_memory(memory_.rows, memory_.cols);
    for (std::size_t l = L_.decoder.size(); l-- > 0;) {
      const auto& s = L_.decoder[l];
      auto& c = dec_[l];
      // x3 = x2 + ffn(ln3(x2))
      Matrix de(T, dx.cols);
      ffn_backward(w_, s.ff1, s.ff2, c.e, c.ffn, dx, de, g);
      norm_backward(w_, s.ln3, c.n3, de, dx, g);
      // x2 = x1 + cross(ln2(x1), memory)
      Matrix db(T, dx.cols);
      attention_backward(w_, s.cross, cfg_.heads, c.b, memory_, false, c.cross, dx, db, d_memory, g);
      norm_backward(w_, s.ln2, c.n2, db, dx, g);
      // x1 = x0 + self(ln1(x0))
      Matrix da(T, dx.cols);
      attention_backward(w_, s.self, cfg_.heads, c.a, c.a, true, c.self, dx, da, da, g);
      norm_backward(w_, s.ln1, c.n1, da, dx, g);
    }
    d_dec = std::move(dx);

    Matrix ex(memory_.rows, memory_.cols);
    norm_backward(w_, L_.encoder_norm, enc_norm_, d_memory, ex, g);
    for (std::size_t l = L_.encoder.size(); l-- > 0;) {
      const auto& s = L_.encoder[l];
      auto& c = enc_[l];
      Matrix db(ex.rows, ex.cols);
      ffn_backward(w_, s.ff1, s.ff2, c.b, c.ffn, ex, db, g);
      norm_backward(w_, s.ln2, c.n2, db, ex, g);
      Matrix da(ex.rows, ex.cols);
      attention_backward(w_, s.self, cfg_.heads, c.a, c.a, false, c.attn, ex, da, da, g);
      norm_backward(w_, s.ln1, c.n1, da, ex, g);
    }
    d_src = std::move(ex);
  }

  const Matrix& log_probs() const { return log_probs_; }

 private:
  Weights w_;
  const ParamLayout& L_;
  const ModelConfig& cfg_;
  std::vector<Matrix> enc_x_, dec_x_;
  std::vector<EncoderLayerCache> enc_;
  std::vector<DecoderLayerCache> dec_;
  NormCache enc_norm_, dec_norm_;
  Matrix memory_, dec_out_, probs_, log_probs_;
};

void check_ids(const ModelConfig& cfg, std::span<const int> ids, const char* what) {
  if (ids.empty()) throw Error(std::string("model: empty ") + what + " sequence");
  if (ids.size() > static_cast<std::size_t>(cfg.max_len)) {
    throw Error(std::string("model: ") + what + " sequence longer than max_len (" +
                std::to_string(ids.size()) + " > " + std::to_string(cfg.max_len) + ")");
  }
  for (int id : ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error(std::string("model: ") + what + " id out of range: " + std::to_string(id));
    }
  }
}

Matrix lookup(std::span<const double> table, std::span<const int> ids, std::size_t d) {
  Matrix m(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * d), d,
                m.row(i).begin());
  }
  return m;
}

struct Inputs {
  Matrix src;
  Matrix dec;  // bos + tgt vectors
  std::vector<int> labels;  // tgt + eos
};

Inputs make_inputs(const ModelParams& p, std::span<const int> src, std::span<const int> tgt) {
  const auto& cfg = p.config();
  check_ids(cfg, src, "source");
  check_ids(cfg, tgt, "target");
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto& L = p.layout();
  auto vals = p.values();
  Inputs in;
  in.src = lookup(vals.subspan(L.src_embed), src, d);
  std::vector<int> dec_ids;
  dec_ids.reserve(tgt.size() + 1);
  dec_ids.push_back(SubwordVocab::kBosId);
  dec_ids.insert(dec_ids.end(), tgt.begin(), tgt.end());
  in.dec = lookup(vals.subspan(L.tgt_embed), dec_ids, d);
  in.labels.assign(tgt.begin(), tgt.end());
  in.labels.push_back(SubwordVocab::kEosId);
  return in;
}

}  // namespace

double accumulate_gradients(const ModelParams& p, std::span<const int> src,
                            std::span<const int> tgt, double weight,
                            std::span<double> param_grads, GradientBundle* bundle) {
  if (bundle != nullptr && weight == 0.0) throw Error("model: zero weight with a gradient bundle");
  Inputs in = make_inputs(p, src, tgt);
  Pass pass(p);
  const double loss = pass.forward(in.src, in.dec, in.labels);
  if (!std::isfinite(loss)) throw Error("model: non-finite loss");
  double* g = param_grads.empty() ? nullptr : param_grads.data();
  if (g != nullptr && param_grads.size() != p.values().size()) {
    throw Error("model: gradient buffer has the wrong size");
  }
  Matrix d_src, d_dec;
  pass.backward(in.labels, weight, d_src, d_dec, g);
  if (g != nullptr) {
    const auto d = static_cast<std::size_t>(p.config().d_model);
    const auto& L = p.layout();
    for (std::size_t i = 0; i < src.size(); ++i) {
      kernels::add(d_src.row(i), std::span<double>(g + L.src_embed + static_cast<std::size_t>(src[i]) * d, d));
    }
    for (std::size_t i = 0; i < d_dec.rows; ++i) {
      const int id = i == 0 ? SubwordVocab::kBosId : tgt[i - 1];
      kernels::add(d_dec.row(i), std::span<double>(g + L.tgt_embed + static_cast<std::size_t>(id) * d, d));
    }
  }
  if (bundle != nullptr) {
    bundle->loss = loss;
    if (weight != 1.0) {
      kernels::scale(1.0 / weight, d_src.data);
      kernels::scale(1.0 / weight, d_dec.data);
    }
    bundle->src_grads = std::move(d_src);
    bundle->tgt_grads = Matrix(tgt.size(), d_dec.cols);
    std::copy(d_dec.data.begin() + static_cast<std::ptrdiff_t>(d_dec.cols), d_dec.data.end(),
              bundle->tgt_grads.data.begin());
  }
  return loss;
}

GradientBundle loss_and_embedding_grads(const ModelParams& p, std::span<const int> src,
                                        std::span<const int> tgt) {
  GradientBundle b;
  accumulate_gradients(p, src, tgt, 1.0, {}, &b);
  return b;
}

double compute_loss(const ModelParams& p, std::span<const int> src, std::span<const int> tgt) {
  Inputs in = make_inputs(p, src, tgt);
  Pass pass(p);
  return pass.forward(in.src, in.dec, in.labels);
}

double loss_from_vectors(const ModelParams& p, const Matrix& src_vectors,
                         const Matrix& tgt_vectors, std::span<const int> tgt) {
  const auto d = static_cast<std::size_t>(p.config().d_model);
  if (src_vectors.cols != d || tgt_vectors.cols != d || tgt_vectors.rows != tgt.size()) {
    throw Error("model: input vector shape mismatch");
  }
  Inputs in = make_inputs(p, std::vector<int>(src_vectors.rows, SubwordVocab::kUnkId), tgt);
  in.src = src_vectors;
  std::copy(tgt_vectors.data.begin(), tgt_vectors.data.end(),
            in.dec.data.begin() + static_cast<std::ptrdiff_t>(d));
  Pass pass(p);
  return pass.forward(in.src, in.dec, in.labels);
}

std::vector<double> token_log_probs(const ModelParams& p, std::span<const int> src,
                                    std::span<const int> output) {
  check_ids(p.config(), src, "source");
  const auto d = static_cast<std::size_t>(p.config().d_model);
  const auto& L = p.layout();
  auto vals = p.values();
  Matrix s = lookup(vals.subspan(L.src_embed), src, d);
  std::vector<int> dec_ids{SubwordVocab::kBosId};
  if (!output.empty()) dec_ids.insert(dec_ids.end(), output.begin(), output.end() - 1);
  Matrix dec = lookup(vals.subspan(L.tgt_embed), dec_ids, d);
  Pass pass(p);
  pass.forward(s, dec, {});
  std::vector<double> out(output.size());
  for (std::size_t t = 0; t < output.size(); ++t) {
    out[t] = pass.log_probs()(t, static_cast<std::size_t>(output[t]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Incremental decoding.

namespace {

struct EncoderMemory {
  // Per decoder layer: cross-attention keys and values of the source.
  std::vector<Matrix> keys, values;
};

struct DecoderState {
  std::vector<Matrix> keys, values;  // per layer, rows = positions so far
  std::size_t length = 0;
};

class IncrementalDecoder {
 public:
  IncrementalDecoder(const ModelParams& p, std::span<const int> src)
      : p_(p), w_{p.values().data()}, L_(p.layout()), cfg_(p.config()) {
    check_ids(cfg_, src, "source");
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    encode(lookup(p.values().subspan(L_.src_embed), src, d));
  }

  DecoderState initial() const {
    DecoderState st;
    st.keys.assign(L_.decoder.size(), Matrix());
    st.values.assign(L_.decoder.size(), Matrix());
    return st;
  }

  // Feeds `token` at the next position and returns the next-token log-probs.
  std::vector<double> step(DecoderState& st, int token) const {
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto heads = static_cast<std::size_t>(cfg_.heads);
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t pos = st.length;
    std::vector<double> x(p_.tgt_embedding(token).begin(), p_.tgt_embedding(token).end());
    if (cfg_.positions) sinusoid_add(x, pos);
    std::vector<double> xhat(d), a(d), q(d), k(d), v(d), ctx(d), o(d);
    std::vector<double> hidden(static_cast<std::size_t>(cfg_.ffn_dim));
    std::vector<double> probs(std::max<std::size_t>(pos + 1, memory_rows_));
    for (std::size_t l = 0; l < L_.decoder.size(); ++l) {
      const auto& s = L_.decoder[l];
      layer_norm_row(w_, s.ln1, x, xhat, a);
      linear_row(w_, s.self.q, a, q);
      linear_row(w_, s.self.k, a, k);
      linear_row(w_, s.self.v, a, v);
      append_row(st.keys[l], k);
      append_row(st.values[l], v);
      for (std::size_t h = 0; h < heads; ++h) {
        attend_row(std::span<const double>(q).subspan(h * dh, dh), st.keys[l], st.values[l], pos + 1,
                   h * dh, dh, scale, probs, std::span<double>(ctx).subspan(h * dh, dh));
      }
      linear_row(w_, s.self.o, ctx, o);
      kernels::add(o, x);
      layer_norm_row(w_, s.ln2, x, xhat, a);
      linear_row(w_, s.cross.q, a, q);
      for (std::size_t h = 0; h < heads; ++h) {
        attend_row(std::span<const double>(q).subspan(h * dh, dh), memory_.keys[l], memory_.values[l],
                   memory_rows_, h * dh, dh, scale, probs, std::span<double>(ctx).subspan(h * dh, dh));
      }
      linear_row(w_, s.cross.o, ctx, o);
      kernels::add(o, x);
      layer_norm_row(w_, s.ln3, x, xhat, a);
      linear_row(w_, s.ff1, a, hidden);
      for (double& hv : hidden) hv = gelu(hv);
      linear_row(w_, s.ff2, hidden, o);
      kernels::add(o, x);
    }
    layer_norm_row(w_, L_.decoder_norm, x, xhat, a);
    const auto V = static_cast<std::size_t>(cfg_.vocab_size);
    std::vector<double> logits(V);
    linear_row(w_, L_.output, a, logits);
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double lv : logits) z += std::exp(lv - top);
    const double log_z = top + std::log(z);
    for (double& lv : logits) lv -= log_z;
    st.length += 1;
    return logits;
  }

 private:
  static void append_row(Matrix& m, std::span<const double> row) {
    if (m.cols == 0) m.cols = row.size();
    m.data.insert(m.data.end(), row.begin(), row.end());
    m.rows += 1;
  }

  void encode(const Matrix& src_in) {
    // Encoder forward, row-wise through the same primitives as Pass.
    Matrix x = src_in;
    if (cfg_.positions) {
      for (std::size_t i = 0; i < x.rows; ++i) sinusoid_add(x.row(i), i);
    }
    for (const auto& s : L_.encoder) {
      EncoderLayerCache c;
      norm_forward(w_, s.ln1, x, c.a, c.n1);
      attention_forward(w_, s.self, cfg_.heads, c.a, c.a, false, c.attn_out, c.attn);
      add_into(x, c.attn_out);
      norm_forward(w_, s.ln2, x, c.b, c.n2);
      ffn_forward(w_, s.ff1, s.ff2, c.b, c.ffn_out, c.ffn);
      add_into(x, c.ffn_out);
    }
    Matrix memory;
    NormCache nc;
    norm_forward(w_, L_.encoder_norm, x, memory, nc);
    memory_rows_ = memory.rows;
    for (const auto& s : L_.decoder) {
      Matrix k, v;
      linear_forward(w_, s.cross.k, memory, k);
      linear_forward(w_, s.cross.v, memory, v);
      memory_.keys.push_back(std::move(k));
      memory_.values.push_back(std::move(v));
    }
  }

  const ModelParams& p_;
  Weights w_;
  const ParamLayout& L_;
  const ModelConfig& cfg_;
  EncoderMemory memory_;
  std::size_t memory_rows_ = 0;
};

struct Hypothesis {
  std::vector<int> ids;
  double log_prob = 0.0;
  DecoderState state;
};

}  // namespace

DecodeResult beam_decode(const ModelParams& p, std::span<const int> src, std::size_t beam,
                         std::size_t max_len) {
  if (beam == 0) throw Error("beam_decode: beam must be at least 1");
  if (max_len == 0) return {};
  const IncrementalDecoder decoder(p, src);
  const auto V = static_cast<std::size_t>(p.config().vocab_size);

  std::vector<Hypothesis> alive(1);
  alive[0].state = decoder.initial();
  std::vector<DecodeResult> finished;

  struct Candidate {
    std::size_t hyp;
    int token;
    double log_prob;
  };
  std::vector<Candidate> cands;
  std::vector<std::vector<double>> step_lp;
  for (std::size_t step = 0; step < max_len && !alive.empty() && finished.size() < beam; ++step) {
    cands.clear();
    step_lp.assign(alive.size(), {});
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const int prev = alive[h].ids.empty() ? SubwordVocab::kBosId : alive[h].ids.back();
      step_lp[h] = decoder.step(alive[h].state, prev);
      for (std::size_t t = 0; t < V; ++t) {
        if (t == SubwordVocab::kPadId || t == SubwordVocab::kBosId) continue;
        cands.push_back({h, static_cast<int>(t), alive[h].log_prob + step_lp[h][t]});
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = cands[c];
      const Hypothesis& parent = alive[cand.hyp];
      if (cand.token == SubwordVocab::kEosId) {
        DecodeResult r;
        r.ids = parent.ids;
        r.log_prob = cand.log_prob;
        r.score = cand.log_prob / static_cast<double>(parent.ids.size() + 1);
        r.finished = true;
        finished.push_back(std::move(r));
      } else {
        Hypothesis h;
        h.ids = parent.ids;
        h.ids.push_back(cand.token);
        h.log_prob = cand.log_prob;
        h.state = parent.state;
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  if (finished.size() < beam) {
    // Hypotheses cut off at max_len.
    for (auto& h : alive) {
      DecodeResult r;
      r.score = h.log_prob / static_cast<double>(h.ids.size());
      r.log_prob = h.log_prob;
      r.ids = std::move(h.ids);
      r.finished = false;
      finished.push_back(std::move(r));
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].score > finished[best].score) best = i;
  }
  return finished[best];
}

}  // namespace advsr
