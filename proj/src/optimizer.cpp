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

#include "advsr/optimizer.hpp"

#include <cmath>

#include "advsr/error.hpp"
#include "advsr/kernels.hpp"

namespace advsr {

OptimizerConfig::Kind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerConfig::Kind::kSgd;
  if (name == "adam") return OptimizerConfig::Kind::kAdam;
  throw Error("unknown optimizer: " + name);
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t num_params) : cfg_(cfg) {
  if (cfg_.kind == OptimizerConfig::Kind::kAdam || cfg_.momentum != 0.0) m_.assign(num_params, 0.0);
  if (cfg_.kind == OptimizerConfig::Kind::kAdam) v_.assign(num_params, 0.0);
}

double Optimizer::apply(std::span<double> params, std::span<double> grads, double lr) {
  if (params.size() != grads.size()) throw Error("optimizer: size mismatch");
  const double norm = std::sqrt(kernels::dot(grads, grads));
  if (!std::isfinite(norm)) throw Error("optimizer: non-finite gradient norm");
  if (cfg_.clip > 0.0 && norm > cfg_.clip) kernels::scale(cfg_.clip / norm, grads);
  ++steps_;
  if (cfg_.kind == OptimizerConfig::Kind::kSgd) {
    if (cfg_.momentum == 0.0) {
      kernels::axpy(-lr, grads, params);
    } else {
      kernels::scale(cfg_.momentum, m_);
      kernels::add(grads, m_);
      kernels::axpy(-lr, m_, params);
    }
    return norm;
  }
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step = lr * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + cfg_.epsilon);
  }
  return norm;
}

StepResult train_step(ModelParams& params, Optimizer& opt, std::span<const TrainingPair> batch,
                      double lr) {
  if (batch.empty()) throw Error("train_step: empty batch");
  std::vector<double> grads(params.values().size(), 0.0);
  const double weight = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& pair : batch) {
    const double l = accumulate_gradients(params, pair.src, pair.tgt, weight, grads);
    if (!std::isfinite(l)) throw Error("train_step: non-finite loss");
    loss += l;
  }
  StepResult r;
  r.mean_loss = loss / static_cast<double>(batch.size());
  r.grad_norm = opt.apply(params.values(), grads, lr);
  return r;
}

}  // namespace advsr
