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

// Acceptance checks. Prints one line per criterion:
//   PASS <n> <name> secs=<t> <details>
// and exits non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "advsr/advsr.hpp"
#include "advsr/bleu.hpp"
#include "advsr/config.hpp"
#include "advsr/harness.hpp"
#include "advsr/lattice.hpp"
#include "advsr/model.hpp"
#include "advsr/noise.hpp"
#include "advsr/toy_task.hpp"
#include "advsr/utf8.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace advsr;

namespace {

struct Outcome {
  bool pass = true;
  std::string reasons;
  std::string notes;

  void fail(const std::string& why) {
    reasons += (reasons.empty() ? "" : "; ") + why;
    pass = false;
  }
  void note(const std::string& s) { notes += (notes.empty() ? "" : " ") + s; }
  std::string detail() const { return reasons.empty() ? notes : "[" + reasons + "] " + notes; }
};

std::string num(double x, int digits = 4) { return format_fixed(x, digits); }

const std::string M(kBoundaryMarker);

// 1. Viterbi and n-best against exhaustive enumeration.
Outcome lattice_oracle() {
  Outcome out;
  Rng rng(1001);
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000 && out.pass; ++trial) {
    const auto v = oracle::random_vocab(rng, "abcdef", 30 + rng.below(60), 2 + rng.below(4));
    const auto word = oracle::random_word(rng, "abcdef", 12);
    const auto all = oracle::enumerate_segmentations(v, word);
    if (viterbi_segment(v, word).piece_ids != all.front().ids) {
      out.fail("viterbi mismatch word=" + word);
      break;
    }
    const std::size_t n = trial % 10 == 0 ? all.size() : 1 + rng.below(std::min<std::size_t>(all.size(), 64));
    const auto lat = nbest_candidates(v, word, n);
    if (lat.candidates.size() != std::min(n, all.size())) {
      out.fail("n-best size mismatch word=" + word);
      break;
    }
    for (std::size_t k = 0; k < lat.candidates.size(); ++k) {
      if (lat.candidates[k] != all[k].ids || lat.log_probs[k] != all[k].score) {
        out.fail("n-best mismatch word=" + word + " rank=" + std::to_string(k));
        break;
      }
      ++compared;
    }
  }
  out.note("instances=1000 candidates=" + std::to_string(compared));
  return out;
}

// 2. Empirical sampling frequencies against the closed form.
Outcome sampling_distribution() {
  Outcome out;
  const auto v = SubwordVocab::from_normal_pieces(
      {{M + "a", -1.0}, {"b", -1.2}, {M + "ab", -1.5}, {M, -3.0}, {"a", -2.0}, {"q", -4.0}});
  const auto all = oracle::enumerate_segmentations(v, "ab");
  if (all.size() != 3) {
    out.fail("fixture word does not have 3 candidates");
    return out;
  }
  std::vector<double> lps;
  for (const auto& s : all) lps.push_back(s.score);
  Rng rng(2002);
  const int draws = 100000;
  for (double alpha : {0.0, 0.1, 1.0}) {
    std::vector<double> freq(3, 0.0);
    for (int i = 0; i < draws; ++i) {
      const auto seg = sample_segmentation(v, "ab", alpha, 3, rng);
      const auto it = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.ids == seg.piece_ids; });
      if (it == all.end()) {
        out.fail("sample outside the candidate set");
        return out;
      }
      freq[static_cast<std::size_t>(it - all.begin())] += 1.0 / draws;
    }
    const double tv = oracle::total_variation(freq, oracle::sampling_distribution(lps, alpha));
    out.note("tv(alpha=" + num(alpha, 1) + ")=" + num(tv));
    if (tv >= 0.02) out.fail("tv too large");
  }
  return out;
}

// 3. Embedding-position gradients against central finite differences.
Outcome gradient_check() {
  Outcome out;
  Rng rng(3003);
  double worst = 0.0;
  std::size_t coords = 0;
  const int instances = 24;
  for (int trial = 0; trial < instances; ++trial) {
    const int V = 6 + static_cast<int>(rng.below(8));
    const auto cfg = oracle::tiny_config(rng, V);
    const auto p = ModelParams::initialize(cfg, rng.next());
    const auto src = oracle::random_ids(rng, V, 6);
    const auto tgt = oracle::random_ids(rng, V, 5);
    const auto r = oracle::fd_embeddings(p, src, tgt);
    worst = std::max(worst, r.max_rel);
    coords += r.checked;
  }
  out.note("instances=" + std::to_string(instances) + " coords=" + std::to_string(coords) +
           " max_rel_err=" + std::to_string(worst));
  if (worst >= 1e-4) out.fail("relative error above 1e-4");
  return out;
}

SubwordVocab adv_vocab() {
  std::vector<Piece> pieces = {{M, -3.0}};
  for (const char* c : {"a", "b", "c", "d"}) pieces.push_back({c, -3.0});
  for (const char* p : {"ab", "cd", "bc", "da", "abc"}) pieces.push_back({p, -4.0});
  for (const char* p : {"a", "b", "ab", "cd", "abcd", "ba"}) pieces.push_back({M + p, -3.5});
  return SubwordVocab::from_normal_pieces(pieces);
}

ModelParams adv_model(const SubwordVocab& v, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.vocab_size = static_cast<int>(v.size());
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  cfg.max_len = 64;
  return ModelParams::initialize(cfg, seed);
}

std::string random_sentence(Rng& rng, std::size_t max_words, std::size_t max_chars) {
  std::string s;
  const std::size_t n = 1 + rng.below(max_words);
  for (std::size_t w = 0; w < n; ++w) s += (w ? " " : "") + oracle::random_word(rng, "abcd", max_chars);
  return s;
}

// 4. R = 1 choices against the brute-force scorer.
Outcome advsr_oracle() {
  Outcome out;
  const auto v = adv_vocab();
  Rng rng(4004);
  std::size_t words = 0, changed = 0;
  for (int trial = 0; trial < 200 && out.pass; ++trial) {
    const auto p = adv_model(v, rng.next());
    const auto src = random_sentence(rng, 4, 5), tgt = random_sentence(rng, 4, 5);
    AdvConfig cfg;
    cfg.R = 1.0;
    cfg.n_candidates = 1 + rng.below(4);
    Rng sample_rng(static_cast<std::uint64_t>(trial));
    const auto r = advsr_sample(p, v, src, tgt, cfg, sample_rng);
    const auto x = viterbi_segment(v, src), y = viterbi_segment(v, tgt);
    const auto bundle = loss_and_embedding_grads(p, x.piece_ids, y.piece_ids);
    const auto want_src = oracle::brute_adv_choices(
        v, x, bundle.src_grads, [&](int id) { return p.src_embedding(id); }, cfg.n_candidates);
    const auto want_tgt = oracle::brute_adv_choices(
        v, y, bundle.tgt_grads, [&](int id) { return p.tgt_embedding(id); }, cfg.n_candidates);
    for (const auto& [side, want] : {std::pair{&r.source, &want_src}, std::pair{&r.target, &want_tgt}}) {
      if (side->words.size() != want->size()) {
        out.fail("word count mismatch trial=" + std::to_string(trial));
        break;
      }
      for (std::size_t j = 0; j < want->size(); ++j) {
        ++words;
        changed += (*want)[j] != 0;
        if (side->words[j].chosen != (*want)[j]) {
          std::string scores;
          for (double x : side->words[j].scores) scores += std::to_string(x) + ",";
          out.fail("choice mismatch trial=" + std::to_string(trial) + " word=" + std::to_string(j) + " got=" +
                   std::to_string(side->words[j].chosen) + " want=" + std::to_string((*want)[j]) +
                   " n=" + std::to_string(cfg.n_candidates) + " src=" + src + " tgt=" + tgt + " scores=" + scores);
          break;
        }
      }
    }
  }
  out.note("cases=200 words=" + std::to_string(words) + " non_original=" + std::to_string(changed));
  return out;
}

class ScaledModel final : public EmbeddingModel {
 public:
  ScaledModel(const ModelParams& p, double scale) : inner_(p), scale_(scale) {}
  int vocab_size() const override { return inner_.vocab_size(); }
  GradientBundle gradients(std::span<const int> src, std::span<const int> tgt) const override {
    ++calls;
    auto b = inner_.gradients(src, tgt);
    b.loss *= scale_;
    for (double& x : b.src_grads.data) x *= scale_;
    for (double& x : b.tgt_grads.data) x *= scale_;
    return b;
  }
  std::span<const double> src_embedding(int id) const override { return inner_.src_embedding(id); }
  std::span<const double> tgt_embedding(int id) const override { return inner_.tgt_embedding(id); }
  mutable int calls = 0;

 private:
  ParamsModel inner_;
  double scale_;
};

// 5. Text preservation, containment, rescaling invariance, single gradient
// pass and the per-word perturbation rate.
Outcome advsr_invariants() {
  Outcome out;
  const auto v = adv_vocab();
  Rng rng(5005);
  LatticeCache cache(v);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = adv_model(v, rng.next());
    const auto src = random_sentence(rng, 6, 7), tgt = random_sentence(rng, 6, 7);
    AdvConfig cfg;
    cfg.R = 0.5;
    ScaledModel m1(p, 1.0), m2(p, 1e3), m3(p, 1e-3);
    Rng r1(trial), r2(trial), r3(trial);
    const auto a = advsr_sample(m1, cache, src, tgt, cfg, r1);
    const auto b = advsr_sample(m2, cache, src, tgt, cfg, r2);
    const auto c = advsr_sample(m3, cache, src, tgt, cfg, r3);
    if (m1.calls != 1) out.fail("more than one gradient pass");
    if (detokenize(v, a.source.adversarial.piece_ids) != src || detokenize(v, a.target.adversarial.piece_ids) != tgt) {
      out.fail("surface text changed: " + src + " / " + tgt);
    }
    if (!(a.source.adversarial == b.source.adversarial && a.target.adversarial == b.target.adversarial &&
          a.source.adversarial == c.source.adversarial && a.target.adversarial == c.target.adversarial)) {
      out.fail("choice changed under loss rescaling");
    }
    for (const auto& [side, text] : {std::pair{&a.source, &src}, std::pair{&a.target, &tgt}}) {
      const auto words = utf8::split_words(*text);
      for (std::size_t j = 0; j < words.size(); ++j) {
        const auto all = oracle::enumerate_segmentations(v, words[j]);
        const auto f = side->adversarial.word(j);
        const std::vector<int> frag(f.begin(), f.end());
        const auto top = all.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.n_candidates, all.size()));
        if (std::none_of(all.begin(), top, [&](const auto& s) { return s.ids == frag; })) {
          out.fail("fragment outside the n-best set: " + std::string(words[j]));
        }
      }
    }
    if (!out.pass) return out;
  }
  out.note("cases=200");

  const auto p = adv_model(v, 77);
  ParamsModel m(p);
  for (double R : {0.25, 0.33}) {
    AdvConfig cfg;
    cfg.R = R;
    std::size_t eligible = 0, attempted = 0;
    while (eligible < 20000) {
      const auto s = random_sentence(rng, 6, 6), t = random_sentence(rng, 6, 6);
      const auto res = advsr_sample(m, cache, s, t, cfg, rng);
      for (const auto& [side, text] : {std::pair{&res.source, &s}, std::pair{&res.target, &t}}) {
        const auto words = utf8::split_words(*text);
        for (const auto& w : side->words) {
          if (cache.nbest(words[w.word_index], cfg.n_candidates).candidates.size() < 2) continue;
          ++eligible;
          attempted += w.attempted;
        }
      }
    }
    const double rate = static_cast<double>(attempted) / static_cast<double>(eligible);
    out.note("rate(R=" + num(R, 2) + ")=" + num(rate));
    if (std::abs(rate - R) > 0.02) out.fail("perturbation rate off");
  }
  return out;
}

struct RobustnessOptions {
  std::string work_dir;
  std::string results;  // evaluate an existing results.tsv instead of training
  std::vector<std::string> overrides;
  bool verbose = false;
};

std::vector<ResultRow> parse_results(const std::string& path) {
  std::vector<ResultRow> rows;
  const auto lines = read_lines(path);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::stringstream ss(lines[i]);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 8) throw std::runtime_error("bad results row: " + lines[i]);
    ResultRow r;
    r.variant = f[0];
    r.mode = parse_train_mode(f[1]);
    if (f[2] != "-") r.R = std::stod(f[2]);
    r.seed = std::stoull(f[3]);
    r.noise = std::stod(f[4]);
    r.bleu = std::stod(f[5]);
    r.best_epoch = std::stoull(f[6]);
    r.valid_bleu = std::stod(f[7]);
    rows.push_back(r);
  }
  return rows;
}

// 6. Directional robustness on the synthetic morphology task.
Outcome robustness(const RobustnessOptions& o) {
  Outcome out;
  std::vector<ResultRow> rows;
  if (!o.results.empty()) {
    rows = parse_results(o.results);
    out.note("results=" + o.results);
  } else {
    const fs::path dir = fs::path(o.work_dir) / "robustness";
    fs::create_directories(dir / "data");
    write_toy_task(make_toy_task(ToyTaskConfig{}), (dir / "data").string());
    Config c;
    c.set("data.dir", (dir / "data").string());
    c.set("run.output_dir", (dir / "out").string());
    for (const auto& kv : o.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::runtime_error("--set expects key=value");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const auto cfg = ExperimentConfig::from_config(c);
    if (cfg.vocab.target_size != 400 || cfg.model.d_model != 64 || cfg.epochs != 15 || cfg.seeds.size() != 3) {
      out.fail("settings differ from vocab 400, d 64, 15 epochs, 3 seeds");
    }
    rows = run_experiment(cfg, o.verbose ? &std::cerr : nullptr).rows;
    out.note("output=" + (dir / "out").string());
  }
  const auto summary = summarize(rows);
  auto mean = [&](const std::string& variant, double noise) -> std::optional<double> {
    for (const auto& s : summary) {
      if (s.variant == variant && std::abs(s.noise - noise) < 1e-9) return s.mean_bleu;
    }
    return std::nullopt;
  };
  // The R value is picked on validation BLEU, as a user of the harness would.
  std::map<std::string, std::pair<double, int>> valid;
  for (const auto& r : rows) {
    if (r.mode == TrainMode::kAdvsr && r.noise == 0.0) {
      valid[r.variant].first += r.valid_bleu;
      valid[r.variant].second += 1;
    }
  }
  std::string adv;
  double adv_valid = -1.0;
  for (const auto& [name, acc] : valid) {
    const double m = acc.first / acc.second;
    if (m > adv_valid) {
      adv_valid = m;
      adv = name;
    }
  }
  const auto base3 = mean("base", 0.3), sr3 = mean("sr", 0.3), adv3 = mean(adv, 0.3);
  const auto base0 = mean("base", 0.0), adv0 = mean(adv, 0.0);
  if (adv.empty() || !base3 || !sr3 || !adv3 || !base0 || !adv0) {
    out.fail("missing variants or noise rows");
    return out;
  }
  std::set<std::uint64_t> seeds;
  for (const auto& r : rows) seeds.insert(r.seed);
  out.note("seeds=" + std::to_string(seeds.size()) + " advsr_variant=" + adv + " noise0.3: base=" + num(*base3) +
           " sr=" + num(*sr3) + " advsr=" + num(*adv3) + " clean: base=" + num(*base0) + " advsr=" + num(*adv0));
  std::map<std::string, std::string> per_variant;
  for (const auto& r : summary) {
    if (r.noise == 0.0 || std::abs(r.noise - 0.3) < 1e-9) {
      per_variant[r.variant] += (per_variant[r.variant].empty() ? "" : "/") + num(r.mean_bleu, 2);
    }
  }
  std::string all;
  for (const auto& [name, v] : per_variant) all += (all.empty() ? "" : ",") + name + "=" + v;
  out.note("clean/noise0.3 means: " + all);
  if (seeds.size() < 3) out.fail("fewer than 3 seeds");
  if (!(*adv3 >= *sr3)) out.fail("advsr < sr at noise 0.3");
  if (!(*sr3 >= *base3)) out.fail("sr < base at noise 0.3");
  if (!(*adv3 - *base3 >= 2.0)) out.fail("advsr - base < 2 at noise 0.3");
  if (!(*adv0 >= *base0 - 1.0)) out.fail("clean advsr < base - 1");
  return out;
}

// 7. Noise statistics over 100k words.
Outcome noise_statistics() {
  Outcome out;
  Rng rng(7007);
  std::vector<std::string> corpus;
  std::size_t words = 0;
  while (words < 100000) {
    std::string s;
    const std::size_t n = 1 + rng.below(10);
    for (std::size_t w = 0; w < n; ++w) s += (w ? " " : "") + oracle::random_word(rng, "abcdefghij", 8);
    words += n;
    corpus.push_back(std::move(s));
  }
  for (double f : {0.1, 0.3, 0.5}) {
    NoiseSpec spec;
    spec.fraction = f;
    spec.alphabet = corpus_alphabet(corpus);
    spec.seed = 99;
    NoiseStats st;
    const auto noisy = noisify_corpus(corpus, spec, &st);
    std::size_t changed = 0, bad = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto a = utf8::split_words(corpus[i]);
      const auto b = utf8::split_words(noisy[i]);
      if (a.size() != b.size()) {
        ++bad;
        continue;
      }
      for (std::size_t j = 0; j < a.size(); ++j) {
        const auto d = oracle::edit_distance(a[j], b[j]);
        if (d > 1) ++bad;
        changed += d != 0;
      }
    }
    const double rate = static_cast<double>(changed) / static_cast<double>(words);
    out.note("rate(" + num(f, 1) + ")=" + num(rate));
    if (bad) out.fail("word with edit distance > 1 or word count change");
    if (changed != st.perturbed) out.fail("a perturbation left its word unchanged");
    if (std::abs(rate - f) > 0.01) out.fail("perturbed-word rate off");
  }
  out.note("words=" + std::to_string(words));
  return out;
}

// 8. BLEU fixtures and agreement with the reference implementation.
Outcome bleu_fixtures() {
  Outcome out;
  using V = std::vector<std::string>;
  const V refs = {"the cat sat on the mat", "there is a cat on the mat", "a b c d e f"};
  const double id = corpus_bleu(refs, refs).bleu;
  if (std::abs(id - 100.0) > 1e-9) out.fail("identity corpus is not 100");
  const double empty = corpus_bleu(V(refs.size()), refs).bleu;
  if (empty != 0.0) out.fail("empty hypotheses are not 0");
  // Hand counts. "the cat sat" has no 4-gram, so its 4-gram precision is 0/0
  // and the score is 0.
  struct Fixture {
    const char* hyp;
    const char* ref;
    double want;
  };
  for (const auto& fx : {Fixture{"the cat sat", "the cat sat down", 0.0},
                         Fixture{"the cat sat on the mat today", "the cat sat on a mat today", 48.8923},
                         Fixture{"a b c d", "a b c e", 59.4604},
                         Fixture{"the cat sat on the mat", "the cat sat on the mat today", 84.6482}}) {
    const double got = corpus_bleu(V{fx.hyp}, V{fx.ref}).bleu;
    if (std::abs(got - fx.want) >= 5e-5) out.fail(std::string("fixture '") + fx.hyp + "' gave " + num(got));
  }
  Rng rng(8008);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    V hyps, rs;
    for (std::size_t i = 0; i < n; ++i) {
      auto sentence = [&] {
        std::string s;
        const std::size_t len = rng.below(12);
        for (std::size_t w = 0; w < len; ++w) s += (w ? " " : "") + oracle::random_word(rng, "abc", 2);
        return s;
      };
      hyps.push_back(sentence());
      rs.push_back(sentence());
    }
    worst = std::max(worst, std::abs(corpus_bleu(hyps, rs).bleu - oracle::reference_bleu(hyps, rs)));
  }
  out.note("fixtures=4 random_corpora=50 max_diff=" + std::to_string(worst));
  if (worst >= 1e-9) out.fail("implementations disagree");
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shell_quote(const fs::path& p) { return "'" + p.string() + "'"; }

// 9. The CLI pipeline twice with equal seeds; every artifact byte-compared.
Outcome determinism(const std::string& cli, const std::string& work_dir) {
  Outcome out;
  if (cli.empty() || !fs::exists(cli)) {
    out.fail("advsr-lab binary not found (pass --cli)");
    return out;
  }
  const fs::path bin_path = fs::absolute(cli);
  const fs::path root = fs::path(work_dir) / "determinism";
  fs::remove_all(root);
  const std::vector<std::string> artifacts = {"vocab.txt", "model.ckpt", "attack.tsv", "hyp.txt", "bleu.txt",
                                              "train.log"};
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string bin = shell_quote(bin_path);
    const std::string script =
        "set -e\ncd " + shell_quote(d) + "\n" +
        bin + " make-toy --output-dir data --train 400 --seed 11; " +
        "head -n 40 data/test.src > test.src; head -n 40 data/test.tgt > test.tgt; " +
        bin + " train-vocab --input data/train.src --input data/train.tgt -o vocab.txt --size 150 2>/dev/null; " +
        bin + " train --vocab vocab.txt --train-src data/train.src --train-tgt data/train.tgt" +
        " --mode advsr --R 0.33 --max-steps 50 --batch-tokens 256 --d-model 16 --ffn-dim 32 --seed 5" +
        " -o model.ckpt 2> train.raw; " +
        "sed -e 's/ secs=[^ ]*//' train.raw > train.log; " +
        bin + " attack --vocab vocab.txt --checkpoint model.ckpt --src test.src --tgt test.tgt --R 0.5 --seed 5" +
        " > attack.tsv; " +
        bin + " translate --vocab vocab.txt --checkpoint model.ckpt < test.src > hyp.txt; " +
        bin + " evaluate --hyp hyp.txt --ref test.tgt > bleu.txt";
    {
      std::ofstream(d / "pipeline.sh") << script << '\n';
    }
    if (std::system(("sh " + shell_quote(d / "pipeline.sh")).c_str()) != 0) {
      out.fail(std::string("pipeline run ") + run + " failed");
      return out;
    }
  }
  for (const auto& f : artifacts) {
    const auto a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    if (a.empty()) out.fail(f + " is empty");
    if (a != b) out.fail(f + " differs");
  }
  out.note("artifacts=" + std::to_string(artifacts.size()) + " dir=" + root.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advsr-lab acceptance checks"};
  std::vector<int> only;
  std::vector<int> skip;
  std::string cli;
  RobustnessOptions rob;
  rob.work_dir = (fs::temp_directory_path() / "advsr_acceptance").string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--skip", skip, "Criteria to skip")->delimiter(',');
  app.add_option("--cli", cli, "Path to the advsr-lab binary");
  app.add_option("--work-dir", rob.work_dir, "Scratch directory");
  app.add_option("--results", rob.results, "Check criterion 6 against an existing results.tsv");
  app.add_option("--set", rob.overrides, "Experiment key=value override for criterion 6");
  app.add_flag("--verbose", rob.verbose, "Echo experiment logs to stderr");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double budget_secs;  // 0: no wall-clock limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "lattice-oracle", 30, lattice_oracle},
      {2, "sampling-distribution", 30, sampling_distribution},
      {3, "gradient-check", 60, gradient_check},
      {4, "advsr-oracle", 60, advsr_oracle},
      {5, "advsr-invariants", 60, advsr_invariants},
      {6, "directional-robustness", 0, [&] { return robustness(rob); }},
      {7, "noise-statistics", 10, noise_statistics},
      {8, "bleu-fixtures", 0, bleu_fixtures},
      {9, "determinism", 0, [&] { return determinism(cli, rob.work_dir); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (std::find(skip.begin(), skip.end(), c.id) != skip.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_secs > 0 && secs > c.budget_secs) o.fail("over the " + num(c.budget_secs, 0) + "s budget");
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << ' ' << c.name << " secs=" << num(secs, 1) << ' '
              << o.detail() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
