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
#include <initializer_list>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advsr/advsr.hpp"
#include "advsr/config.hpp"
#include "advsr/lattice.hpp"
#include "advsr/model.hpp"
#include "advsr/noise.hpp"
#include "advsr/optimizer.hpp"
#include "advsr/rng.hpp"
#include "advsr/toy_task.hpp"
#include "advsr/vocab.hpp"
#include "advsr/vocab_trainer.hpp"

namespace advsr {

enum class TrainMode { kBase, kSr, kAdvsr };

TrainMode parse_train_mode(std::string_view name);
std::string_view train_mode_name(TrainMode mode);

struct SrConfig {
  double alpha = kDefaultSampleAlpha;
  std::size_t l = kDefaultSampleL;
};

// Line-oriented `event=name key=value ...` records. Values containing spaces,
// quotes or '=' are double-quoted.
class Logger {
 public:
  Logger() = default;
  explicit Logger(std::ostream* sink) { add_sink(sink); }
  void add_sink(std::ostream* sink);
  void log(std::string_view event,
           std::initializer_list<std::pair<std::string_view, std::string>> fields);

 private:
  std::vector<std::ostream*> sinks_;
  std::mutex mu_;
};

// Fixed-point rendering used in logs and tables.
std::string format_fixed(double value, int digits);

// The segmentation pair fed to train_step for one training example: the
// Viterbi segmentations (base), a smoothed sample of each side (sr), or an
// adversarial choice (advsr).
std::pair<Segmentation, Segmentation> make_training_sample(TrainMode mode, LatticeCache& cache,
                                                           const ModelParams& model,
                                                           std::string_view source,
                                                           std::string_view target,
                                                           const SrConfig& sr,
                                                           const AdvConfig& adv, Rng& rng);

struct TrainOptions {
  TrainMode mode = TrainMode::kBase;
  std::string label;  // logged as variant= when set
  std::size_t epochs = 15;
  std::size_t batch_tokens = 1024;
  double lr = 1e-3;
  // Linear decay from lr to 0 over the run's updates instead of a constant lr.
  bool linear_decay = false;
  OptimizerConfig optimizer{OptimizerConfig::Kind::kAdam};
  // Stops after this many updates when non-zero (validation still runs).
  std::size_t max_steps = 0;
  SrConfig sr;
  AdvConfig adv;
  std::size_t beam = 4;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // cumulative updates
  double train_loss = 0.0;
  double valid_bleu = 0.0;
};

struct TrainOutcome {
  ModelParams best;
  std::size_t best_epoch = 0;
  double best_valid_bleu = 0.0;
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
};

// Batches of pair indices whose summed (longest side + 1) token count stays
// within `batch_tokens`, formed over pairs sorted by length. A pair longer
// than the budget gets a batch of its own.
std::vector<std::vector<std::size_t>> make_length_batches(
    const std::vector<std::pair<std::size_t, std::size_t>>& lengths, std::size_t batch_tokens);

// Trains from ModelParams::initialize(model_cfg, seed). After every epoch the
// model is scored on `valid` and the best-scoring epoch (earliest on ties) is
// returned; without validation data the final parameters are returned.
TrainOutcome train_model(const SubwordVocab& vocab, const ModelConfig& model_cfg,
                         const ParallelCorpus& train, const ParallelCorpus& valid,
                         const TrainOptions& opts, Logger* log = nullptr);

// Beam-decodes the Viterbi segmentation of each source sentence and returns
// the detokenized hypotheses. Output length is capped at 2 * |src| + 10.
std::vector<std::string> translate(const ModelParams& params, LatticeCache& cache,
                                   const std::vector<std::string>& sources, std::size_t beam);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::vector<std::string>& lines, const std::string& path);

// Relative output directories are resolved against this variable when set.
inline constexpr char kOutputRootEnv[] = "ADVSR_OUTPUT_ROOT";
std::string resolve_output_dir(const std::string& dir);

struct ExperimentConfig {
  std::string train_src, train_tgt, valid_src, valid_tgt, test_src, test_tgt;
  std::vector<TrainMode> modes = {TrainMode::kBase, TrainMode::kSr, TrainMode::kAdvsr};
  // Existing vocab file; when empty a joint vocab is trained on both sides of
  // the training data.
  std::string vocab_path;
  VocabTrainConfig vocab{.target_size = 400};
  ModelConfig model;  // vocab_size is taken from the vocab
  std::size_t epochs = 15;
  std::size_t batch_tokens = 1024;
  double lr = 3e-3;
  bool linear_decay = false;  // train.lr_schedule = constant | linear
  OptimizerConfig optimizer{OptimizerConfig::Kind::kAdam};
  std::size_t max_steps = 0;
  std::size_t beam = 4;
  SrConfig sr;
  // Each R value is trained and reported as its own advsr variant.
  std::vector<double> adv_r = {0.25, 0.33};
  AdvConfig adv;
  std::vector<double> noise_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<NoiseOp> noise_ops = {NoiseOp::kDrop, NoiseOp::kReplace, NoiseOp::kInsert};
  std::string noise_alphabet;  // empty: characters of the training sources
  std::uint64_t noise_seed = 1234;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string output_dir = "advsr-out";
  // Worker threads for the (seed, variant) runs; 0 uses every hardware thread.
  // Results do not depend on it.
  std::size_t jobs = 0;

  // Unknown keys are rejected. `data.dir` supplies {train,valid,test}.{src,tgt}
  // defaults for the six corpus paths.
  static ExperimentConfig from_config(const Config& c);
  // Every field as key=value, suitable for from_config.
  Config to_config() const;
  // Value checks plus existence of every input file.
  void validate() const;
};

std::vector<std::string> experiment_config_keys();

struct ResultRow {
  std::string variant;  // "base", "sr", "advsr-R0.25", ...
  TrainMode mode = TrainMode::kBase;
  std::optional<double> R;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double bleu = 0.0;
  std::size_t best_epoch = 0;
  double valid_bleu = 0.0;
};

struct SummaryRow {
  std::string variant;
  double noise = 0.0;
  double mean_bleu = 0.0;
  std::size_t seeds = 0;
};

struct ExperimentReport {
  std::string output_dir;
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  // Mean BLEU of `variant` at `noise`; absent when not run.
  std::optional<double> mean(std::string_view variant, double noise) const;
};

std::string variant_name(TrainMode mode, std::optional<double> R);
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
std::string results_table(const std::vector<ResultRow>& rows);
std::string summary_table(const std::vector<SummaryRow>& rows);

// Writes into the resolved output directory:
//   config.resolved, vocab.txt, experiment.log, test.noise<f>.src,
//   <variant>/seed<s>/{best.ckpt, test.noise<f>.hyp, history.tsv},
//   results.tsv, summary.tsv.
// A file named INCOMPLETE exists while the run is in progress and stays
// behind on failure; errors are rethrown prefixed with `stage=<name>`.
ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* echo = nullptr);

}  // namespace advsr
