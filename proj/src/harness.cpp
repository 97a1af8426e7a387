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

#include "advsr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "advsr/bleu.hpp"
#include "advsr/checkpoint.hpp"
#include "advsr/error.hpp"

namespace fs = std::filesystem;

namespace advsr {
namespace {

bool needs_quotes(std::string_view v) {
  if (v.empty()) return true;
  return v.find_first_of(" \t\"=") != std::string_view::npos;
}

std::string quote(std::string_view v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

// Shortest decimal form that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fraction_tag(double f) { return format_fixed(f, 2); }

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return mix64(seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
}

// Runs `body`, rethrowing failures as advsr::Error tagged with the stage.
template <typename F>
auto staged(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    const std::string what = e.what();
    if (what.rfind("stage=", 0) == 0) throw;
    throw Error("stage=" + stage + ": " + what);
  }
}

}  // namespace

TrainMode parse_train_mode(std::string_view name) {
  if (name == "base") return TrainMode::kBase;
  if (name == "sr") return TrainMode::kSr;
  if (name == "advsr") return TrainMode::kAdvsr;
  throw Error("unknown mode '" + std::string(name) + "' (expected base, sr or advsr)");
}

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBase: return "base";
    case TrainMode::kSr: return "sr";
    case TrainMode::kAdvsr: return "advsr";
  }
  return "?";
}

void Logger::add_sink(std::ostream* sink) {
  if (sink) sinks_.push_back(sink);
}

void Logger::log(std::string_view event,
                 std::initializer_list<std::pair<std::string_view, std::string>> fields) {
  std::string line = "event=" + std::string(event);
  for (const auto& [k, v] : fields) {
    line += ' ';
    line += k;
    line += '=';
    line += needs_quotes(v) ? quote(v) : v;
  }
  line += '\n';
  const std::lock_guard lock(mu_);
  for (auto* s : sinks_) {
    *s << line;
    s->flush();
  }
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::pair<Segmentation, Segmentation> make_training_sample(TrainMode mode, LatticeCache& cache,
                                                           const ModelParams& model,
                                                           std::string_view source,
                                                           std::string_view target,
                                                           const SrConfig& sr,
                                                           const AdvConfig& adv, Rng& rng) {
  switch (mode) {
    case TrainMode::kBase:
      return {viterbi_segment(cache, source), viterbi_segment(cache, target)};
    case TrainMode::kSr: {
      auto x = sample_segmentation(cache, source, sr.alpha, sr.l, rng);
      auto y = sample_segmentation(cache, target, sr.alpha, sr.l, rng);
      return {std::move(x), std::move(y)};
    }
    case TrainMode::kAdvsr: {
      ParamsModel m(model);
      auto r = advsr_sample(m, cache, source, target, adv, rng);
      return {std::move(r.source.adversarial), std::move(r.target.adversarial)};
    }
  }
  throw Error("invalid mode");
}

std::vector<std::vector<std::size_t>> make_length_batches(
    const std::vector<std::pair<std::size_t, std::size_t>>& lengths, std::size_t batch_tokens) {
  if (batch_tokens == 0) throw Error("batch_tokens must be positive");
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::size_t tokens = 0;
  for (std::size_t i : order) {
    const std::size_t t = std::max(lengths[i].first, lengths[i].second) + 1;
    if (!cur.empty() && tokens + t > batch_tokens) {
      batches.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
    cur.push_back(i);
    tokens += t;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

std::vector<std::string> translate(const ModelParams& params, LatticeCache& cache,
                                   const std::vector<std::string>& sources, std::size_t beam) {
  const auto& vocab = cache.vocab();
  std::vector<std::string> out;
  out.reserve(sources.size());
  for (const auto& s : sources) {
    const auto seg = viterbi_segment(cache, s);
    if (seg.piece_ids.empty()) {
      out.emplace_back();
      continue;
    }
    std::vector<int> src = seg.piece_ids;
    const auto limit = static_cast<std::size_t>(params.config().max_len);
    if (src.size() > limit) src.resize(limit);
    const std::size_t max_len = std::min(limit, 2 * src.size() + 10);
    const auto r = beam_decode(params, src, beam, max_len);
    out.push_back(detokenize(vocab, r.ids));
  }
  return out;
}

TrainOutcome train_model(const SubwordVocab& vocab, const ModelConfig& model_cfg,
                         const ParallelCorpus& train, const ParallelCorpus& valid,
                         const TrainOptions& opts, Logger* log) {
  if (train.src.size() != train.tgt.size()) throw Error("training corpus sides differ in length");
  if (valid.src.size() != valid.tgt.size()) throw Error("validation corpus sides differ in length");
  if (train.src.empty()) throw Error("empty training corpus");
  if (opts.epochs == 0) throw Error("epochs must be positive");
  if (!(opts.lr >= 0.0)) throw Error("lr must be non-negative");
  if (opts.mode == TrainMode::kAdvsr) opts.adv.validate();
  if (opts.mode == TrainMode::kSr && (!(opts.sr.alpha >= 0.0) || opts.sr.l == 0)) {
    throw Error("sr: alpha must be >= 0 and l >= 1");
  }
  if (static_cast<std::size_t>(model_cfg.vocab_size) != vocab.size()) {
    throw Error("model vocab_size does not match the vocab");
  }

  LatticeCache cache(vocab);
  std::vector<std::pair<std::size_t, std::size_t>> lengths;
  lengths.reserve(train.src.size());
  for (std::size_t i = 0; i < train.src.size(); ++i) {
    const auto x = viterbi_segment(cache, train.src[i]);
    const auto y = viterbi_segment(cache, train.tgt[i]);
    if (x.piece_ids.empty() || y.piece_ids.empty()) {
      throw Error("training pair " + std::to_string(i + 1) + " has an empty side");
    }
    lengths.emplace_back(x.piece_ids.size(), y.piece_ids.size());
  }
  const auto batches = make_length_batches(lengths, opts.batch_tokens);

  ModelParams params = ModelParams::initialize(model_cfg, opts.seed);
  Optimizer optimizer(opts.optimizer, params.values().size());
  TrainOutcome out{params, 0, 0.0, {}, 0};
  bool have_best = false;
  const std::size_t max_len = static_cast<std::size_t>(model_cfg.max_len);
  std::size_t total_steps = opts.epochs * batches.size();
  if (opts.max_steps != 0) total_steps = std::min(total_steps, opts.max_steps);

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t es = epoch_seed(opts.seed, epoch);
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::stream(es, ~std::uint64_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool stop = false;
    for (std::size_t b : order) {
      std::vector<TrainingPair> batch;
      batch.reserve(batches[b].size());
      for (std::size_t i : batches[b]) {
        Rng rng = Rng::stream(es, i);
        auto [x, y] = make_training_sample(opts.mode, cache, params, train.src[i], train.tgt[i],
                                           opts.sr, opts.adv, rng);
        // Sampled segmentations can outgrow the model; fall back to Viterbi.
        if (x.piece_ids.size() > max_len) x = viterbi_segment(cache, train.src[i]);
        if (y.piece_ids.size() > max_len) y = viterbi_segment(cache, train.tgt[i]);
        batch.push_back({std::move(x.piece_ids), std::move(y.piece_ids)});
      }
      double lr = opts.lr;
      if (opts.linear_decay) {
        lr *= 1.0 - static_cast<double>(out.steps) / static_cast<double>(total_steps);
      }
      const auto r = train_step(params, optimizer, batch, lr);
      loss_sum += r.mean_loss * static_cast<double>(batch.size());
      loss_count += batch.size();
      ++out.steps;
      if (opts.max_steps != 0 && out.steps >= opts.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.steps = out.steps;
    rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    if (!valid.src.empty()) {
      const auto hyps = translate(params, cache, valid.src, opts.beam);
      rec.valid_bleu = corpus_bleu(hyps, valid.tgt).bleu;
    }
    out.history.push_back(rec);
    if (!have_best || rec.valid_bleu > out.best_valid_bleu) {
      have_best = true;
      out.best = params;
      out.best_epoch = rec.epoch;
      out.best_valid_bleu = rec.valid_bleu;
    }
    if (valid.src.empty()) {
      out.best = params;
      out.best_epoch = rec.epoch;
    }
    if (log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log->log("epoch", {{"variant", opts.label.empty() ? std::string(train_mode_name(opts.mode)) : opts.label},
                         {"mode", std::string(train_mode_name(opts.mode))},
                         {"seed", std::to_string(opts.seed)},
                         {"epoch", std::to_string(rec.epoch)},
                         {"steps", std::to_string(rec.steps)},
                         {"train_loss", format_fixed(rec.train_loss, 6)},
                         {"valid_bleu", format_fixed(rec.valid_bleu, 4)},
                         {"secs", format_fixed(secs, 1)}});
    }
    if (stop) break;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  for (const auto& l : lines) os << l << '\n';
  if (!os) throw Error("write failed: " + path);
}

std::string resolve_output_dir(const std::string& dir) {
  const fs::path p(dir);
  if (p.is_absolute()) return p.string();
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) {
    return (fs::path(root) / p).string();
  }
  return p.string();
}

std::vector<std::string> experiment_config_keys() {
  return {"data.dir",          "data.train_src",       "data.train_tgt",
          "data.valid_src",    "data.valid_tgt",       "data.test_src",
          "data.test_tgt",     "vocab.path",           "vocab.size",
          "vocab.seed_multiplier", "vocab.em_iterations", "vocab.prune_fraction",
          "vocab.max_piece_len", "vocab.char_coverage", "model.d_model",
          "model.heads",       "model.ffn_dim",        "model.encoder_layers",
          "model.decoder_layers", "model.max_len",     "model.positions",
          "train.modes",       "train.epochs",         "train.batch_tokens",
          "train.lr",          "train.lr_schedule",    "train.optimizer",      "train.clip",
          "train.momentum",    "train.beta1",          "train.beta2",
          "train.max_steps",   "decode.beam",          "sr.alpha",
          "sr.l",              "adv.R",                "adv.n_candidates",
          "adv.perturb_source", "adv.perturb_target",  "noise.fractions",
          "noise.ops",         "noise.alphabet",       "noise.seed",
          "run.seeds",         "run.output_dir",       "run.jobs"};
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  c.require_known(experiment_config_keys());
  ExperimentConfig e;
  auto count = [&](const std::string& key, std::size_t fallback) {
    const long long v = c.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw Error("config: " + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  const std::string dir = c.get_string("data.dir", "");
  auto path = [&](const std::string& key, const char* file) {
    if (auto v = c.find(key)) return *v;
    return dir.empty() ? std::string() : (fs::path(dir) / file).string();
  };
  e.train_src = path("data.train_src", "train.src");
  e.train_tgt = path("data.train_tgt", "train.tgt");
  e.valid_src = path("data.valid_src", "valid.src");
  e.valid_tgt = path("data.valid_tgt", "valid.tgt");
  e.test_src = path("data.test_src", "test.src");
  e.test_tgt = path("data.test_tgt", "test.tgt");

  if (c.has("train.modes")) {
    e.modes.clear();
    for (const auto& m : c.get_list("train.modes", {})) e.modes.push_back(parse_train_mode(m));
  }
  e.vocab_path = c.get_string("vocab.path", "");
  e.vocab.target_size = count("vocab.size", e.vocab.target_size);
  e.vocab.seed_multiplier = count("vocab.seed_multiplier", e.vocab.seed_multiplier);
  e.vocab.em_iterations = count("vocab.em_iterations", e.vocab.em_iterations);
  e.vocab.prune_fraction = c.get_double("vocab.prune_fraction", e.vocab.prune_fraction);
  e.vocab.max_piece_len = count("vocab.max_piece_len", e.vocab.max_piece_len);
  e.vocab.char_coverage = c.get_double("vocab.char_coverage", e.vocab.char_coverage);

  e.model.d_model = static_cast<int>(count("model.d_model", e.model.d_model));
  e.model.heads = static_cast<int>(count("model.heads", e.model.heads));
  e.model.ffn_dim = static_cast<int>(count("model.ffn_dim", e.model.ffn_dim));
  e.model.encoder_layers = static_cast<int>(count("model.encoder_layers", e.model.encoder_layers));
  e.model.decoder_layers = static_cast<int>(count("model.decoder_layers", e.model.decoder_layers));
  e.model.max_len = static_cast<int>(count("model.max_len", e.model.max_len));
  e.model.positions = c.get_bool("model.positions", e.model.positions);

  e.epochs = count("train.epochs", e.epochs);
  e.batch_tokens = count("train.batch_tokens", e.batch_tokens);
  e.lr = c.get_double("train.lr", e.lr);
  if (auto s = c.find("train.lr_schedule")) {
    if (*s != "constant" && *s != "linear") throw Error("config: train.lr_schedule must be constant or linear");
    e.linear_decay = *s == "linear";
  }
  if (auto k = c.find("train.optimizer")) e.optimizer.kind = parse_optimizer_kind(*k);
  e.optimizer.clip = c.get_double("train.clip", e.optimizer.clip);
  e.optimizer.momentum = c.get_double("train.momentum", e.optimizer.momentum);
  e.optimizer.beta1 = c.get_double("train.beta1", e.optimizer.beta1);
  e.optimizer.beta2 = c.get_double("train.beta2", e.optimizer.beta2);
  e.max_steps = count("train.max_steps", e.max_steps);
  e.beam = count("decode.beam", e.beam);

  e.sr.alpha = c.get_double("sr.alpha", e.sr.alpha);
  e.sr.l = count("sr.l", e.sr.l);
  e.adv_r = c.get_doubles("adv.R", e.adv_r);
  e.adv.n_candidates = count("adv.n_candidates", e.adv.n_candidates);
  e.adv.perturb_source = c.get_bool("adv.perturb_source", e.adv.perturb_source);
  e.adv.perturb_target = c.get_bool("adv.perturb_target", e.adv.perturb_target);

  e.noise_fractions = c.get_doubles("noise.fractions", e.noise_fractions);
  if (auto ops = c.find("noise.ops")) e.noise_ops = parse_noise_ops(*ops);
  e.noise_alphabet = c.get_string("noise.alphabet", e.noise_alphabet);
  e.noise_seed = static_cast<std::uint64_t>(count("noise.seed", e.noise_seed));

  if (c.has("run.seeds")) {
    e.seeds.clear();
    for (const auto& s : c.get_list("run.seeds", {})) {
      Config one;
      one.set("seed", s);
      const long long v = one.get_int("seed", 0);
      if (v < 0) throw Error("config: run.seeds must be non-negative");
      e.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  e.output_dir = c.get_string("run.output_dir", e.output_dir);
  e.jobs = count("run.jobs", e.jobs);
  return e;
}

Config ExperimentConfig::to_config() const {
  Config c;
  c.set("data.train_src", train_src);
  c.set("data.train_tgt", train_tgt);
  c.set("data.valid_src", valid_src);
  c.set("data.valid_tgt", valid_tgt);
  c.set("data.test_src", test_src);
  c.set("data.test_tgt", test_tgt);
  std::string modes_text;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (i) modes_text += ',';
    modes_text += train_mode_name(modes[i]);
  }
  c.set("train.modes", modes_text);
  if (!vocab_path.empty()) c.set("vocab.path", vocab_path);
  c.set("vocab.size", std::to_string(vocab.target_size));
  c.set("vocab.seed_multiplier", std::to_string(vocab.seed_multiplier));
  c.set("vocab.em_iterations", std::to_string(vocab.em_iterations));
  c.set("vocab.prune_fraction", exact(vocab.prune_fraction));
  c.set("vocab.max_piece_len", std::to_string(vocab.max_piece_len));
  c.set("vocab.char_coverage", exact(vocab.char_coverage));
  c.set("model.d_model", std::to_string(model.d_model));
  c.set("model.heads", std::to_string(model.heads));
  c.set("model.ffn_dim", std::to_string(model.ffn_dim));
  c.set("model.encoder_layers", std::to_string(model.encoder_layers));
  c.set("model.decoder_layers", std::to_string(model.decoder_layers));
  c.set("model.max_len", std::to_string(model.max_len));
  c.set("model.positions", model.positions ? "true" : "false");
  c.set("train.epochs", std::to_string(epochs));
  c.set("train.batch_tokens", std::to_string(batch_tokens));
  c.set("train.lr", exact(lr));
  c.set("train.lr_schedule", linear_decay ? "linear" : "constant");
  c.set("train.optimizer", optimizer.kind == OptimizerConfig::Kind::kAdam ? "adam" : "sgd");
  c.set("train.clip", exact(optimizer.clip));
  c.set("train.momentum", exact(optimizer.momentum));
  c.set("train.beta1", exact(optimizer.beta1));
  c.set("train.beta2", exact(optimizer.beta2));
  c.set("train.max_steps", std::to_string(max_steps));
  c.set("decode.beam", std::to_string(beam));
  c.set("sr.alpha", exact(sr.alpha));
  c.set("sr.l", std::to_string(sr.l));
  std::string rs;
  for (std::size_t i = 0; i < adv_r.size(); ++i) rs += (i ? "," : "") + exact(adv_r[i]);
  c.set("adv.R", rs);
  c.set("adv.n_candidates", std::to_string(adv.n_candidates));
  c.set("adv.perturb_source", adv.perturb_source ? "true" : "false");
  c.set("adv.perturb_target", adv.perturb_target ? "true" : "false");
  std::string fr;
  for (std::size_t i = 0; i < noise_fractions.size(); ++i) {
    fr += (i ? "," : "") + exact(noise_fractions[i]);
  }
  c.set("noise.fractions", fr);
  std::string ops;
  for (std::size_t i = 0; i < noise_ops.size(); ++i) {
    ops += (i ? "," : "") + std::string(noise_op_name(noise_ops[i]));
  }
  c.set("noise.ops", ops);
  if (!noise_alphabet.empty()) c.set("noise.alphabet", noise_alphabet);
  c.set("noise.seed", std::to_string(noise_seed));
  std::string seeds_text;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    seeds_text += (i ? "," : "") + std::to_string(seeds[i]);
  }
  c.set("run.seeds", seeds_text);
  c.set("run.output_dir", output_dir);
  c.set("run.jobs", std::to_string(jobs));
  return c;
}

void ExperimentConfig::validate() const {
  const std::pair<const char*, const std::string*> files[] = {
      {"data.train_src", &train_src}, {"data.train_tgt", &train_tgt},
      {"data.valid_src", &valid_src}, {"data.valid_tgt", &valid_tgt},
      {"data.test_src", &test_src},   {"data.test_tgt", &test_tgt}};
  for (const auto& [key, p] : files) {
    if (p->empty()) throw Error(std::string("config: ") + key + " is not set");
    if (!fs::is_regular_file(*p)) throw Error(std::string("config: ") + key + " not found: " + *p);
  }
  if (!vocab_path.empty() && !fs::is_regular_file(vocab_path)) {
    throw Error("config: vocab.path not found: " + vocab_path);
  }
  if (modes.empty()) throw Error("config: train.modes is empty");
  if (seeds.empty()) throw Error("config: run.seeds is empty");
  if (epochs == 0) throw Error("config: train.epochs must be positive");
  if (batch_tokens == 0) throw Error("config: train.batch_tokens must be positive");
  if (beam == 0) throw Error("config: decode.beam must be positive");
  if (!(lr >= 0.0)) throw Error("config: train.lr must be non-negative");
  ModelConfig m = model;
  m.vocab_size = SubwordVocab::kNumReserved + 1;
  m.validate();
  const bool has_sr = std::find(modes.begin(), modes.end(), TrainMode::kSr) != modes.end();
  const bool has_adv = std::find(modes.begin(), modes.end(), TrainMode::kAdvsr) != modes.end();
  if (has_sr && (!(sr.alpha >= 0.0) || sr.l == 0)) {
    throw Error("config: sr.alpha must be >= 0 and sr.l >= 1");
  }
  if (has_adv) {
    if (adv_r.empty()) throw Error("config: adv.R is empty");
    for (double r : adv_r) {
      AdvConfig a = adv;
      a.R = r;
      a.validate();
    }
  }
  if (noise_fractions.empty()) throw Error("config: noise.fractions is empty");
  for (double f : noise_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error("config: noise fraction outside [0, 1]");
  }
  if (noise_ops.empty()) throw Error("config: noise.ops is empty");
}

std::string variant_name(TrainMode mode, std::optional<double> R) {
  std::string out(train_mode_name(mode));
  if (R) out += "-R" + format_fixed(*R, 2);
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.variant, fraction_tag(r.noise));
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back({r.variant, r.noise, r.bleu, 1});
    } else {
      out[it->second].mean_bleu += r.bleu;
      ++out[it->second].seeds;
    }
  }
  for (auto& s : out) s.mean_bleu /= static_cast<double>(s.seeds);
  return out;
}

std::string results_table(const std::vector<ResultRow>& rows) {
  std::string out = "variant\tmode\tR\tseed\tnoise\tbleu\tbest_epoch\tvalid_bleu\n";
  for (const auto& r : rows) {
    out += r.variant + '\t' + std::string(train_mode_name(r.mode)) + '\t' +
           (r.R ? format_fixed(*r.R, 2) : std::string("-")) + '\t' + std::to_string(r.seed) +
           '\t' + fraction_tag(r.noise) + '\t' + format_fixed(r.bleu, 4) + '\t' +
           std::to_string(r.best_epoch) + '\t' + format_fixed(r.valid_bleu, 4) + '\n';
  }
  return out;
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::string out = "variant\tnoise\tmean_bleu\tseeds\n";
  for (const auto& r : rows) {
    out += r.variant + '\t' + fraction_tag(r.noise) + '\t' + format_fixed(r.mean_bleu, 4) + '\t' +
           std::to_string(r.seeds) + '\n';
  }
  return out;
}

std::optional<double> ExperimentReport::mean(std::string_view variant, double noise) const {
  for (const auto& s : summary) {
    if (s.variant == variant && fraction_tag(s.noise) == fraction_tag(noise)) return s.mean_bleu;
  }
  return std::nullopt;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* echo) {
  staged("config", [&] { cfg.validate(); });
  const fs::path out_dir = resolve_output_dir(cfg.output_dir);
  staged("setup", [&] { fs::create_directories(out_dir); });
  const fs::path incomplete = out_dir / "INCOMPLETE";
  {
    std::ofstream mark(incomplete);
    mark << "run in progress or failed\n";
  }
  std::ofstream log_file(out_dir / "experiment.log", std::ios::binary);
  Logger log(&log_file);
  log.add_sink(echo);

  auto fail = [&](const std::exception& e) {
    log.log("error", {{"message", e.what()}});
    std::ofstream mark(incomplete, std::ios::app);
    mark << e.what() << '\n';
  };

  try {
    staged("config", [&] {
      std::ofstream os(out_dir / "config.resolved", std::ios::binary);
      os << cfg.to_config().serialize();
      if (!os) throw Error("cannot write config.resolved");
    });

    ParallelCorpus train, valid, test;
    staged("load", [&] {
      train = {read_lines(cfg.train_src), read_lines(cfg.train_tgt)};
      valid = {read_lines(cfg.valid_src), read_lines(cfg.valid_tgt)};
      test = {read_lines(cfg.test_src), read_lines(cfg.test_tgt)};
      if (train.src.size() != train.tgt.size()) throw Error("train sides differ in length");
      if (valid.src.size() != valid.tgt.size()) throw Error("valid sides differ in length");
      if (test.src.size() != test.tgt.size()) throw Error("test sides differ in length");
    });
    log.log("data", {{"train", std::to_string(train.src.size())},
                     {"valid", std::to_string(valid.src.size())},
                     {"test", std::to_string(test.src.size())}});

    const SubwordVocab vocab = staged("vocab", [&] {
      if (!cfg.vocab_path.empty()) return load_vocab(cfg.vocab_path);
      std::vector<std::string> corpus = train.src;
      corpus.insert(corpus.end(), train.tgt.begin(), train.tgt.end());
      return train_vocab(corpus, cfg.vocab);
    });
    staged("vocab", [&] { save_vocab(vocab, (out_dir / "vocab.txt").string()); });
    log.log("vocab", {{"size", std::to_string(vocab.size())}});

    std::vector<std::vector<std::string>> noisy;
    staged("noise", [&] {
      NoiseSpec spec;
      spec.ops = cfg.noise_ops;
      spec.alphabet = cfg.noise_alphabet.empty() ? corpus_alphabet(train.src)
                                                 : parse_alphabet(cfg.noise_alphabet);
      for (double f : cfg.noise_fractions) {
        spec.fraction = f;
        spec.seed = cfg.noise_seed + static_cast<std::uint64_t>(std::llround(f * 10000.0));
        NoiseStats stats;
        noisy.push_back(f == 0.0 ? test.src : noisify_corpus(test.src, spec, &stats));
        write_lines(noisy.back(), (out_dir / ("test.noise" + fraction_tag(f) + ".src")).string());
        log.log("noise", {{"fraction", fraction_tag(f)},
                          {"words", std::to_string(stats.words)},
                          {"perturbed", std::to_string(stats.perturbed)}});
      }
    });

    struct Variant {
      TrainMode mode;
      std::optional<double> R;
    };
    std::vector<Variant> variants;
    for (TrainMode m : cfg.modes) {
      if (m == TrainMode::kAdvsr) {
        for (double r : cfg.adv_r) variants.push_back({m, r});
      } else {
        variants.push_back({m, std::nullopt});
      }
    }

    ModelConfig model_cfg = cfg.model;
    model_cfg.vocab_size = static_cast<int>(vocab.size());
    ExperimentReport report;
    report.output_dir = out_dir.string();

    // One job per (seed, variant). Jobs are independent and deterministic, so
    // they run on worker threads; rows are gathered in job order.
    struct Job {
      std::uint64_t seed;
      Variant variant;
    };
    std::vector<Job> jobs;
    for (std::uint64_t seed : cfg.seeds) {
      for (const auto& v : variants) jobs.push_back({seed, v});
    }
    std::vector<std::vector<ResultRow>> job_rows(jobs.size());
    std::vector<std::exception_ptr> job_errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto run_job = [&](const Job& job) {
      const auto& v = job.variant;
      const std::uint64_t seed = job.seed;
      std::vector<ResultRow> rows;
      const std::string name = variant_name(v.mode, v.R);
      const std::string tag = "train variant=" + name + " seed=" + std::to_string(seed);
      const fs::path dir = out_dir / name / ("seed" + std::to_string(seed));
      staged(tag, [&] { fs::create_directories(dir); });
      TrainOptions opts;
      opts.mode = v.mode;
      opts.label = name;
      opts.epochs = cfg.epochs;
      opts.batch_tokens = cfg.batch_tokens;
      opts.lr = cfg.lr;
      opts.linear_decay = cfg.linear_decay;
      opts.optimizer = cfg.optimizer;
      opts.max_steps = cfg.max_steps;
      opts.sr = cfg.sr;
      opts.adv = cfg.adv;
      if (v.R) opts.adv.R = *v.R;
      opts.adv.seed = seed;
      opts.beam = cfg.beam;
      opts.seed = seed;
      log.log("train_start", {{"variant", name}, {"seed", std::to_string(seed)}});
      const auto outcome =
          staged(tag, [&] { return train_model(vocab, model_cfg, train, valid, opts, &log); });
      staged(tag, [&] {
        save_checkpoint(outcome.best, (dir / "best.ckpt").string());
        std::string hist = "epoch\tsteps\ttrain_loss\tvalid_bleu\n";
        for (const auto& h : outcome.history) {
          hist += std::to_string(h.epoch) + '\t' + std::to_string(h.steps) + '\t' +
                  format_fixed(h.train_loss, 6) + '\t' + format_fixed(h.valid_bleu, 4) + '\n';
        }
        std::ofstream os(dir / "history.tsv", std::ios::binary);
        os << hist;
      });
      log.log("selected", {{"variant", name},
                           {"seed", std::to_string(seed)},
                           {"best_epoch", std::to_string(outcome.best_epoch)},
                           {"valid_bleu", format_fixed(outcome.best_valid_bleu, 4)}});

      LatticeCache cache(vocab);
      for (std::size_t k = 0; k < cfg.noise_fractions.size(); ++k) {
        const double f = cfg.noise_fractions[k];
        const std::string dtag = "decode variant=" + name + " seed=" + std::to_string(seed) +
                                 " noise=" + fraction_tag(f);
        const double bleu = staged(dtag, [&] {
          const auto hyps = translate(outcome.best, cache, noisy[k], cfg.beam);
          write_lines(hyps, (dir / ("test.noise" + fraction_tag(f) + ".hyp")).string());
          return corpus_bleu(hyps, test.tgt).bleu;
        });
        rows.push_back({name, v.mode, v.R, seed, f, bleu, outcome.best_epoch, outcome.best_valid_bleu});
        log.log("test", {{"variant", name},
                         {"seed", std::to_string(seed)},
                         {"noise", fraction_tag(f)},
                         {"bleu", format_fixed(bleu, 4)}});
      }
      return rows;
    };
    auto worker = [&] {
      for (std::size_t j; !failed && (j = next++) < jobs.size();) {
        try {
          job_rows[j] = run_job(jobs[j]);
        } catch (...) {
          job_errors[j] = std::current_exception();
          failed = true;
        }
      }
    };
    std::size_t threads = cfg.jobs != 0 ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs.size());
    log.log("jobs", {{"count", std::to_string(jobs.size())}, {"threads", std::to_string(threads)}});
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : job_errors) {
      if (e) std::rethrow_exception(e);
    }
    for (auto& rows : job_rows) report.rows.insert(report.rows.end(), rows.begin(), rows.end());

    report.summary = summarize(report.rows);
    staged("report", [&] {
      std::ofstream rs(out_dir / "results.tsv", std::ios::binary);
      rs << results_table(report.rows);
      std::ofstream ss(out_dir / "summary.tsv", std::ios::binary);
      ss << summary_table(report.summary);
      if (!rs || !ss) throw Error("cannot write result tables");
    });
    log.log("done", {{"rows", std::to_string(report.rows.size())}});
    fs::remove(incomplete);
    return report;
  } catch (const std::exception& e) {
    fail(e);
    throw;
  }
}

}  // namespace advsr
