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

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace advsr {

// U+2581 LOWER ONE EIGHTH BLOCK, prefixed to every word before segmentation.
inline constexpr std::string_view kBoundaryMarker = "\xE2\x96\x81";

struct Piece {
  std::string text;
  double log_prob = 0.0;
  bool operator==(const Piece&) const = default;
};

struct VocabMeta {
  double char_coverage = 0.9995;
  std::string boundary_marker{kBoundaryMarker};
  bool operator==(const VocabMeta&) const = default;
};

// Unigram subword language model. Ids [0, kNumReserved) are the reserved
// pieces <pad>, <unk>, <s>, </s>; the remaining pieces carry the unigram
// log-probabilities. Immutable after construction.
class SubwordVocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr int kNumReserved = 4;
  static constexpr std::array<std::string_view, kNumReserved> kReservedPieces = {
      "<pad>", "<unk>", "<s>", "</s>"};
  // ln(1e-7)
  static constexpr double kDefaultUnkLogProb = -16.11809565095832;

  // `pieces` must start with the reserved pieces in id order. Throws
  // advsr::Error on duplicates, non-finite or positive log-probs, empty
  // pieces, or a boundary marker anywhere but the first character.
  SubwordVocab(std::vector<Piece> pieces, VocabMeta meta = {});

  // Convenience: prepends the reserved pieces to `normal_pieces`.
  static SubwordVocab from_normal_pieces(std::vector<Piece> normal_pieces, VocabMeta meta = {},
                                         double unk_log_prob = kDefaultUnkLogProb);

  std::size_t size() const { return pieces_.size(); }
  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)).text; }
  double log_prob(int id) const { return pieces_.at(static_cast<std::size_t>(id)).log_prob; }
  const VocabMeta& meta() const { return meta_; }
  const std::string& marker() const { return meta_.boundary_marker; }

  std::optional<int> id_of(std::string_view piece) const;
  // Stored log-probability, absent for unknown pieces.
  std::optional<double> piece_log_prob(std::string_view piece) const;

  double unk_log_prob() const { return pieces_[kUnkId].log_prob; }
  static bool is_reserved(int id) { return id >= 0 && id < kNumReserved; }
  bool starts_word(int id) const;
  // Longest piece, in characters.
  int max_piece_chars() const { return max_piece_chars_; }

  bool operator==(const SubwordVocab& other) const {
    return pieces_ == other.pieces_ && meta_ == other.meta_;
  }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::vector<Piece> pieces_;
  VocabMeta meta_;
  std::unordered_map<std::string, int, StringHash, std::equal_to<>> index_;
  int max_piece_chars_ = 1;
};

// Text format: `#`-prefixed header lines (`# key=value`), then one
// `piece<TAB>log_prob` per line with the reserved pieces first. Log-probs are
// written in shortest round-trip form, so load(save(v)) == v bit-exactly.
void save_vocab(const SubwordVocab& vocab, const std::string& path);
std::string serialize_vocab(const SubwordVocab& vocab);
// Throws advsr::ParseError naming the offending line.
SubwordVocab load_vocab(const std::string& path);
SubwordVocab parse_vocab(std::string_view text);

}  // namespace advsr
