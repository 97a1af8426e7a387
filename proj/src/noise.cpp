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

#include "advsr/noise.hpp"

#include <algorithm>
#include <set>

#include "advsr/error.hpp"
#include "advsr/utf8.hpp"

namespace advsr {

void NoiseSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("noise: fraction must be in [0, 1]");
  if (ops.empty()) throw Error("noise: no operations enabled");
  const bool needs_alphabet =
      std::any_of(ops.begin(), ops.end(), [](NoiseOp op) { return op != NoiseOp::kDrop; });
  if (needs_alphabet && alphabet.empty()) {
    throw Error("noise: replace/insert need a non-empty alphabet");
  }
}

std::string_view noise_op_name(NoiseOp op) {
  switch (op) {
    case NoiseOp::kDrop: return "drop";
    case NoiseOp::kReplace: return "replace";
    case NoiseOp::kInsert: return "insert";
  }
  return "?";
}

std::vector<NoiseOp> parse_noise_ops(std::string_view text) {
  std::vector<NoiseOp> ops;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string_view name = text.substr(pos, comma - pos);
    NoiseOp op;
    if (name == "drop") {
      op = NoiseOp::kDrop;
    } else if (name == "replace") {
      op = NoiseOp::kReplace;
    } else if (name == "insert") {
      op = NoiseOp::kInsert;
    } else {
      throw Error("noise: unknown op '" + std::string(name) + "'");
    }
    if (std::find(ops.begin(), ops.end(), op) == ops.end()) ops.push_back(op);
    pos = comma + 1;
  }
  return ops;
}

std::vector<std::string> corpus_alphabet(std::span<const std::string> sentences) {
  std::set<std::string> chars;
  for (const auto& s : sentences) {
    for (std::string_view w : utf8::split_words(s)) {
      for (std::string_view c : utf8::split_chars(w)) chars.emplace(c);
    }
  }
  return {chars.begin(), chars.end()};
}

std::vector<std::string> parse_alphabet(std::string_view chars) {
  std::set<std::string> out;
  for (std::string_view c : utf8::split_chars(chars)) {
    if (c != " ") out.emplace(c);
  }
  return {out.begin(), out.end()};
}

namespace {

std::string_view replacement_for(std::string_view original, const NoiseSpec& spec, Rng& rng) {
  std::vector<std::string_view> choices;
  choices.reserve(spec.alphabet.size());
  for (const auto& c : spec.alphabet) {
    if (c != original) choices.push_back(c);
  }
  if (choices.empty()) {
    throw Error("noise: alphabet has no replacement for '" + std::string(original) + "'");
  }
  return choices[rng.below(choices.size())];
}

}  // namespace

std::string perturb_word(std::string_view word, const NoiseSpec& spec, Rng& rng) {
  const auto chars = utf8::split_chars(word);
  NoiseOp op = spec.ops[rng.below(spec.ops.size())];
  if (op == NoiseOp::kDrop && chars.size() <= 1) op = NoiseOp::kReplace;
  std::string out;
  switch (op) {
    case NoiseOp::kDrop: {
      const auto at = rng.below(chars.size());
      for (std::size_t i = 0; i < chars.size(); ++i) {
        if (i != at) out += chars[i];
      }
      break;
    }
    case NoiseOp::kReplace: {
      const auto at = rng.below(chars.size());
      for (std::size_t i = 0; i < chars.size(); ++i) {
        out += i == at ? replacement_for(chars[i], spec, rng) : chars[i];
      }
      break;
    }
    case NoiseOp::kInsert: {
      const auto at = rng.below(chars.size() + 1);
      const std::string_view c = spec.alphabet[rng.below(spec.alphabet.size())];
      for (std::size_t i = 0; i <= chars.size(); ++i) {
        if (i == at) out += c;
        if (i < chars.size()) out += chars[i];
      }
      break;
    }
  }
  return out;
}

std::vector<std::string> noisify_corpus(std::span<const std::string> sentences,
                                        const NoiseSpec& spec, NoiseStats* stats) {
  spec.validate();
  std::vector<std::string> out;
  out.reserve(sentences.size());
  NoiseStats local;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    Rng rng = Rng::stream(spec.seed, s);
    std::string line;
    for (std::string_view w : utf8::split_words(sentences[s])) {
      if (!line.empty()) line += ' ';
      ++local.words;
      if (rng.uniform() < spec.fraction) {
        ++local.perturbed;
        line += perturb_word(w, spec, rng);
      } else {
        line += w;
      }
    }
    out.push_back(std::move(line));
  }
  if (stats != nullptr) *stats = local;
  return out;
}

}  // namespace advsr
