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
#include <span>
#include <string>
#include <vector>

#include "advsr/model.hpp"

namespace advsr {

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kSgd;
  // Global L2 norm the batch gradient is clipped to; <= 0 disables clipping.
  double clip = 1.0;
  double momentum = 0.0;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

OptimizerConfig::Kind parse_optimizer_kind(const std::string& name);

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::size_t num_params);
  // Clips `grads` in place and updates `params`. Returns the pre-clip norm.
  double apply(std::span<double> params, std::span<double> grads, double lr);
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t steps_ = 0;
};

struct TrainingPair {
  std::vector<int> src;
  std::vector<int> tgt;
};

struct StepResult {
  double mean_loss = 0.0;
  double grad_norm = 0.0;
};

// One optimizer step on the batch-mean of the per-pair token-mean losses.
// Throws advsr::Error when the loss is not finite.
StepResult train_step(ModelParams& params, Optimizer& opt, std::span<const TrainingPair> batch,
                      double lr);

}  // namespace advsr
