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

// advsr-lab: command-line front end for the toolkit.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "advsr/advsr.hpp"
#include "advsr/bleu.hpp"
#include "advsr/checkpoint.hpp"
#include "advsr/config.hpp"
#include "advsr/error.hpp"
#include "advsr/harness.hpp"
#include "advsr/lattice.hpp"
#include "advsr/noise.hpp"
#include "advsr/toy_task.hpp"
#include "advsr/utf8.hpp"
#include "advsr/vocab.hpp"
#include "advsr/vocab_trainer.hpp"

namespace {

using namespace advsr;

std::vector<std::string> stdin_lines() {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string joined_pieces(const SubwordVocab& vocab, std::span<const int> ids) {
  return utf8::join(piece_strings(vocab, ids), " ");
}

struct TrainVocabArgs {
  std::vector<std::string> inputs;
  std::string output;
  VocabTrainConfig cfg{.target_size = 8000};
};

int run_train_vocab(const TrainVocabArgs& a) {
  std::vector<std::string> corpus;
  for (const auto& path : a.inputs) {
    auto lines = read_lines(path);
    for (auto& l : lines) {
      if (!utf8::split_words(l).empty()) corpus.push_back(std::move(l));
    }
  }
  const auto vocab = train_vocab(corpus, a.cfg);
  save_vocab(vocab, a.output);
  Logger log(&std::cerr);
  log.log("train_vocab", {{"sentences", std::to_string(corpus.size())},
                          {"size", std::to_string(vocab.size())},
                          {"output", a.output}});
  return 0;
}

struct SegmentArgs {
  std::string vocab;
  std::string mode = "viterbi";
  double alpha = kDefaultSampleAlpha;
  std::size_t l = kDefaultSampleL;
  std::size_t n = 9;
  std::uint64_t seed = 0;
};

int run_segment(const SegmentArgs& a) {
  const auto vocab = load_vocab(a.vocab);
  LatticeCache cache(vocab);
  const auto lines = stdin_lines();
  if (a.mode != "viterbi" && a.mode != "sample" && a.mode != "nbest") {
    throw Error("segment: unknown mode '" + a.mode + "'");
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (a.mode == "viterbi") {
      std::cout << joined_pieces(vocab, viterbi_segment(cache, lines[i]).piece_ids) << '\n';
    } else if (a.mode == "sample") {
      Rng rng = Rng::stream(a.seed, i);
      std::cout << joined_pieces(vocab, sample_segmentation(cache, lines[i], a.alpha, a.l, rng).piece_ids)
                << '\n';
    } else {
      // word <TAB> rank <TAB> log_prob <TAB> pieces, blank line between sentences
      for (auto w : utf8::split_words(lines[i])) {
        const auto& lat = cache.nbest(w, a.n);
        for (std::size_t k = 0; k < lat.candidates.size(); ++k) {
          std::cout << w << '\t' << k << '\t' << format_fixed(lat.log_probs[k], 6) << '\t'
                    << joined_pieces(vocab, lat.candidates[k]) << '\n';
        }
      }
      std::cout << '\n';
    }
  }
  return 0;
}

struct TrainArgs {
  std::string vocab, train_src, train_tgt, valid_src, valid_tgt, output;
  std::string mode = "base";
  std::string optimizer = "adam";
  std::string lr_schedule = "constant";
  ExperimentConfig defaults;
  double R = 0.25;
  std::uint64_t seed = 1;
};

int run_train(TrainArgs& a) {
  const auto vocab = load_vocab(a.vocab);
  ParallelCorpus train{read_lines(a.train_src), read_lines(a.train_tgt)};
  ParallelCorpus valid;
  if (!a.valid_src.empty()) valid = {read_lines(a.valid_src), read_lines(a.valid_tgt)};
  auto& d = a.defaults;
  d.model.vocab_size = static_cast<int>(vocab.size());
  TrainOptions opts;
  opts.mode = parse_train_mode(a.mode);
  opts.epochs = d.epochs;
  opts.batch_tokens = d.batch_tokens;
  opts.lr = d.lr;
  if (a.lr_schedule != "constant" && a.lr_schedule != "linear") {
    throw Error("--lr-schedule must be constant or linear");
  }
  opts.linear_decay = a.lr_schedule == "linear";
  opts.optimizer = d.optimizer;
  opts.optimizer.kind = parse_optimizer_kind(a.optimizer);
  opts.max_steps = d.max_steps;
  opts.sr = d.sr;
  opts.adv = d.adv;
  opts.adv.R = a.R;
  opts.adv.seed = a.seed;
  opts.beam = d.beam;
  opts.seed = a.seed;
  Logger log(&std::cerr);
  const auto outcome = train_model(vocab, d.model, train, valid, opts, &log);
  save_checkpoint(outcome.best, a.output);
  log.log("train_done", {{"best_epoch", std::to_string(outcome.best_epoch)},
                         {"valid_bleu", format_fixed(outcome.best_valid_bleu, 4)},
                         {"steps", std::to_string(outcome.steps)},
                         {"output", a.output}});
  return 0;
}

struct AttackArgs {
  std::string vocab, checkpoint, src, tgt;
  AdvConfig adv{.R = 1.0};
  std::uint64_t seed = 0;
};

std::string side_scores(const AdvSide& side) {
  std::string out;
  for (std::size_t j = 0; j < side.words.size(); ++j) {
    if (j) out += ';';
    const auto& w = side.words[j];
    if (!w.attempted) {
      out += '-';
      continue;
    }
    for (std::size_t k = 0; k < w.scores.size(); ++k) {
      if (k) out += ',';
      out += format_fixed(w.scores[k], 6);
    }
    out += '@' + std::to_string(w.chosen);
  }
  return out;
}

int run_attack(const AttackArgs& a) {
  const auto vocab = load_vocab(a.vocab);
  const auto params = load_checkpoint(a.checkpoint);
  const auto src = read_lines(a.src);
  const auto tgt = read_lines(a.tgt);
  if (src.size() != tgt.size()) throw Error("attack: source and target differ in length");
  LatticeCache cache(vocab);
  ParamsModel model(params);
  // pair <TAB> side <TAB> original <TAB> adversarial <TAB> scores
  // scores: per word, candidate scores then @chosen; '-' when not attempted.
  std::cout << "pair\tside\toriginal\tadversarial\tscores\n";
  for (std::size_t i = 0; i < src.size(); ++i) {
    Rng rng = Rng::stream(a.seed, i);
    const auto r = advsr_sample(model, cache, src[i], tgt[i], a.adv, rng);
    for (const auto* side : {&r.source, &r.target}) {
      std::cout << i + 1 << '\t' << (side == &r.source ? "src" : "tgt") << '\t'
                << joined_pieces(vocab, side->original.piece_ids) << '\t'
                << joined_pieces(vocab, side->adversarial.piece_ids) << '\t' << side_scores(*side)
                << '\n';
    }
  }
  return 0;
}

struct NoisifyArgs {
  double fraction = 0.1;
  std::string ops = "drop,replace,insert";
  std::string alphabet;
  std::uint64_t seed = 0;
};

int run_noisify(const NoisifyArgs& a) {
  const auto lines = stdin_lines();
  NoiseSpec spec;
  spec.fraction = a.fraction;
  spec.ops = parse_noise_ops(a.ops);
  spec.alphabet = a.alphabet.empty() ? corpus_alphabet(lines) : parse_alphabet(a.alphabet);
  spec.seed = a.seed;
  NoiseStats stats;
  for (const auto& l : noisify_corpus(lines, spec, &stats)) std::cout << l << '\n';
  Logger log(&std::cerr);
  log.log("noisify", {{"words", std::to_string(stats.words)},
                      {"perturbed", std::to_string(stats.perturbed)}});
  return 0;
}

int run_translate(const std::string& vocab_path, const std::string& checkpoint, std::size_t beam) {
  const auto vocab = load_vocab(vocab_path);
  const auto params = load_checkpoint(checkpoint);
  LatticeCache cache(vocab);
  for (const auto& l : translate(params, cache, stdin_lines(), beam)) std::cout << l << '\n';
  return 0;
}

int run_evaluate(const std::string& hyp, const std::string& ref) {
  std::cout << format_bleu_report(corpus_bleu(read_lines(hyp), read_lines(ref)));
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::vector<std::string>& overrides,
                       const std::string& output_dir) {
  Config c = config_path.empty() ? Config() : Config::load(config_path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + o + "'");
    c.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (!output_dir.empty()) c.set("run.output_dir", output_dir);
  const auto cfg = ExperimentConfig::from_config(c);
  const auto report = run_experiment(cfg, &std::cerr);
  std::cout << summary_table(report.summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial subword regularization lab"};
  app.require_subcommand(1);

  TrainVocabArgs tv;
  auto* c_tv = app.add_subcommand("train-vocab", "Train a unigram subword vocabulary");
  c_tv->add_option("--input", tv.inputs, "Training text files")->required();
  c_tv->add_option("--output,-o", tv.output, "Vocab file to write")->required();
  c_tv->add_option("--size", tv.cfg.target_size, "Vocabulary size including reserved pieces");
  c_tv->add_option("--em-iterations", tv.cfg.em_iterations);
  c_tv->add_option("--prune-fraction", tv.cfg.prune_fraction);
  c_tv->add_option("--max-piece-len", tv.cfg.max_piece_len);
  c_tv->add_option("--seed-multiplier", tv.cfg.seed_multiplier);
  c_tv->add_option("--char-coverage", tv.cfg.char_coverage);

  SegmentArgs sg;
  auto* c_sg = app.add_subcommand("segment", "Segment stdin line by line");
  c_sg->add_option("--vocab", sg.vocab)->required();
  c_sg->add_option("--mode", sg.mode, "viterbi, sample or nbest");
  c_sg->add_option("--alpha", sg.alpha);
  c_sg->add_option("--l", sg.l);
  c_sg->add_option("--n", sg.n);
  c_sg->add_option("--seed", sg.seed);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train one model");
  c_tr->add_option("--vocab", tr.vocab)->required();
  c_tr->add_option("--train-src", tr.train_src)->required();
  c_tr->add_option("--train-tgt", tr.train_tgt)->required();
  c_tr->add_option("--valid-src", tr.valid_src);
  c_tr->add_option("--valid-tgt", tr.valid_tgt);
  c_tr->add_option("--output,-o", tr.output)->required();
  c_tr->add_option("--mode", tr.mode, "base, sr or advsr");
  c_tr->add_option("--seed", tr.seed);
  c_tr->add_option("--epochs", tr.defaults.epochs);
  c_tr->add_option("--max-steps", tr.defaults.max_steps);
  c_tr->add_option("--batch-tokens", tr.defaults.batch_tokens);
  c_tr->add_option("--lr", tr.defaults.lr);
  c_tr->add_option("--lr-schedule", tr.lr_schedule, "constant or linear");
  c_tr->add_option("--optimizer", tr.optimizer, "adam or sgd");
  c_tr->add_option("--clip", tr.defaults.optimizer.clip);
  c_tr->add_option("--d-model", tr.defaults.model.d_model);
  c_tr->add_option("--heads", tr.defaults.model.heads);
  c_tr->add_option("--ffn-dim", tr.defaults.model.ffn_dim);
  c_tr->add_option("--encoder-layers", tr.defaults.model.encoder_layers);
  c_tr->add_option("--decoder-layers", tr.defaults.model.decoder_layers);
  c_tr->add_option("--alpha", tr.defaults.sr.alpha);
  c_tr->add_option("--l", tr.defaults.sr.l);
  c_tr->add_option("--R", tr.R);
  c_tr->add_option("--n-candidates", tr.defaults.adv.n_candidates);
  c_tr->add_option("--beam", tr.defaults.beam);

  AttackArgs at;
  auto* c_at = app.add_subcommand("attack", "Adversarial segmentations for a parallel corpus");
  c_at->add_option("--vocab", at.vocab)->required();
  c_at->add_option("--checkpoint", at.checkpoint)->required();
  c_at->add_option("--src", at.src)->required();
  c_at->add_option("--tgt", at.tgt)->required();
  c_at->add_option("--R", at.adv.R);
  c_at->add_option("--n-candidates", at.adv.n_candidates);
  c_at->add_option("--seed", at.seed);
  bool src_only = false, tgt_only = false;
  c_at->add_flag("--source-only", src_only);
  c_at->add_flag("--target-only", tgt_only);

  NoisifyArgs nz;
  auto* c_nz = app.add_subcommand("noisify", "Inject character typos into stdin");
  c_nz->add_option("--fraction", nz.fraction);
  c_nz->add_option("--ops", nz.ops);
  c_nz->add_option("--alphabet", nz.alphabet, "Characters for replace/insert (default: input's)");
  c_nz->add_option("--seed", nz.seed);

  std::string hyp, ref;
  std::string tl_vocab, tl_checkpoint;
  std::size_t tl_beam = 4;
  auto* c_tl = app.add_subcommand("translate", "Beam-decode stdin line by line");
  c_tl->add_option("--vocab", tl_vocab)->required();
  c_tl->add_option("--checkpoint", tl_checkpoint)->required();
  c_tl->add_option("--beam", tl_beam);

  auto* c_ev = app.add_subcommand("evaluate", "Corpus BLEU");
  c_ev->add_option("--hyp", hyp)->required();
  c_ev->add_option("--ref", ref)->required();

  std::string config_path, output_dir;
  std::vector<std::string> overrides;
  auto* c_ex = app.add_subcommand("experiment", "Base / SR / AdvSR robustness experiment");
  c_ex->add_option("--config,-c", config_path);
  c_ex->add_option("--set", overrides, "key=value override");
  c_ex->add_option("--output-dir", output_dir);

  std::string toy_dir;
  ToyTaskConfig toy;
  auto* c_toy = app.add_subcommand("make-toy", "Write the synthetic morphology task");
  c_toy->add_option("--output-dir", toy_dir)->required();
  c_toy->add_option("--seed", toy.seed);
  c_toy->add_option("--train", toy.train_pairs);
  c_toy->add_option("--stems", toy.stems);
  c_toy->add_option("--suffixes", toy.suffixes);

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*c_tv) return run_train_vocab(tv);
    if (*c_sg) return run_segment(sg);
    if (*c_tr) return run_train(tr);
    if (*c_at) {
      if (src_only && tgt_only) throw Error("--source-only and --target-only exclude each other");
      at.adv.perturb_source = !tgt_only;
      at.adv.perturb_target = !src_only;
      return run_attack(at);
    }
    if (*c_nz) return run_noisify(nz);
    if (*c_tl) return run_translate(tl_vocab, tl_checkpoint, tl_beam);
    if (*c_ev) return run_evaluate(hyp, ref);
    if (*c_ex) return run_experiment_cmd(config_path, overrides, output_dir);
    if (*c_toy) {
      write_toy_task(make_toy_task(toy), toy_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "event=error command=" << stage << " message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
