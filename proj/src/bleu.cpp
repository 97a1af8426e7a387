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

#include "advsr/bleu.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <regex>

#include "advsr/error.hpp"
#include "advsr/utf8.hpp"

namespace advsr {

std::vector<std::string> tokenize_eval(std::string_view text) {
  static const std::regex kSymbols(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
  static const std::regex kPeriodCommaNoDigitBefore(R"(([^0-9])([\.,]))");
  static const std::regex kPeriodCommaNoDigitAfter(R"(([\.,])([^0-9]))");
  static const std::regex kDashAfterDigit(R"(([0-9])(-))");
  std::string s = " ";
  for (char c : text) {
    s += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : (c == '\n' ? ' ' : c);
  }
  s += ' ';
  s = std::regex_replace(s, kSymbols, " $1 ");
  s = std::regex_replace(s, kPeriodCommaNoDigitBefore, "$1 $2 ");
  s = std::regex_replace(s, kPeriodCommaNoDigitAfter, " $1 $2");
  s = std::regex_replace(s, kDashAfterDigit, "$1 $2 ");
  std::vector<std::string> out;
  for (std::string_view w : utf8::split_words(s)) out.emplace_back(w);
  return out;
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    correct[n] += o.correct[n];
    total[n] += o.total[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

namespace {

std::map<std::string, std::size_t> ngram_counts(std::span<const std::string> toks, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) key += '\x1f';
      key += toks[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuStats sentence_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= kBleuMaxOrder; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    s.total[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) s.correct[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

BleuReport bleu_from_stats(const BleuStats& stats) {
  BleuReport r;
  r.stats = stats;
  r.hyp_len = stats.hyp_len;
  r.ref_len = stats.ref_len;
  // Orders the hypothesis cannot contain keep precision 0, which zeroes the
  // geometric mean.
  double smooth = 1.0;
  bool zero = false;
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    if (stats.total[n] == 0) {
      zero = true;
      break;
    }
    if (stats.correct[n] == 0) {
      smooth *= 2.0;
      r.precisions[n] = 100.0 / (smooth * static_cast<double>(stats.total[n]));
    } else {
      r.precisions[n] = 100.0 * static_cast<double>(stats.correct[n]) / static_cast<double>(stats.total[n]);
    }
  }
  if (stats.hyp_len == 0) {
    r.brevity_penalty = 0.0;
  } else if (stats.hyp_len < stats.ref_len) {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(stats.ref_len) / static_cast<double>(stats.hyp_len));
  } else {
    r.brevity_penalty = 1.0;
  }
  if (zero || stats.hyp_len == 0) {
    r.bleu = 0.0;
    return r;
  }
  double log_sum = 0.0;
  for (int n = 0; n < kBleuMaxOrder; ++n) log_sum += std::log(r.precisions[n]);
  r.bleu = r.brevity_penalty * std::exp(log_sum / kBleuMaxOrder);
  return r;
}

BleuReport corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size()) {
    throw Error("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses but " +
                std::to_string(refs.size()) + " references");
  }
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    total += sentence_stats(tokenize_eval(hyps[i]), tokenize_eval(refs[i]));
  }
  return bleu_from_stats(total);
}

std::string format_bleu_report(const BleuReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "BLEU = %.2f %.1f/%.1f/%.1f/%.1f (BP = %.3f ratio = %.3f hyp_len = %zu ref_len = %zu)\n",
                r.bleu, r.precisions[0], r.precisions[1], r.precisions[2], r.precisions[3],
                r.brevity_penalty,
                r.ref_len == 0 ? 0.0 : static_cast<double>(r.hyp_len) / static_cast<double>(r.ref_len),
                r.hyp_len, r.ref_len);
  std::string out = buf;
  std::snprintf(buf, sizeof(buf), "bleu=%.6f\n", r.bleu);
  out += buf;
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    std::snprintf(buf, sizeof(buf), "precision_%d=%.6f\n", n + 1, r.precisions[n]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "brevity_penalty=%.6f\nhyp_len=%zu\nref_len=%zu\n", r.brevity_penalty,
                r.hyp_len, r.ref_len);
  out += buf;
  return out;
}

}  // namespace advsr
