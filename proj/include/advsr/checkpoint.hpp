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

#include <optional>
#include <string>

#include "advsr/model.hpp"

namespace advsr {

// Binary checkpoint, little-endian:
//   8 bytes   magic "ADVSRCKP"
//   u32       format version (1)
//   u32 + n   architecture tag ("attn-encdec")
//   7 x i32   vocab_size, d_model, heads, ffn_dim, encoder_layers,
//             decoder_layers, max_len
//   u8        positions flag
//   u64       parameter count
//   f64 x n   parameters in layout order
//   u64       FNV-1a hash of the parameter bytes
inline constexpr char kArchitectureTag[] = "attn-encdec";

void save_checkpoint(const ModelParams& params, const std::string& path);
// Throws advsr::ParseError on truncation or corruption; nothing is returned
// unless the whole file validated. With `expected`, also rejects checkpoints
// whose configuration differs.
ModelParams load_checkpoint(const std::string& path,
                            const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace advsr
