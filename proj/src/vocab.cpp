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

#include "advsr/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "advsr/error.hpp"
#include "advsr/utf8.hpp"

namespace advsr {

SubwordVocab::SubwordVocab(std::vector<Piece> pieces, VocabMeta meta)
    : pieces_(std::move(pieces)), meta_(std::move(meta)) {
  if (pieces_.size() < static_cast<std::size_t>(kNumReserved)) {
    throw Error("vocab is missing reserved pieces");
  }
  if (meta_.boundary_marker.empty() || utf8::char_count(meta_.boundary_marker) != 1) {
    throw Error("boundary marker must be a single character");
  }
  index_.reserve(pieces_.size());
  for (std::size_t id = 0; id < pieces_.size(); ++id) {
    const Piece& p = pieces_[id];
    if (id < kNumReserved && p.text != kReservedPieces[id]) {
      throw Error("reserved piece " + std::string(kReservedPieces[id]) + " expected at id " +
                  std::to_string(id));
    }
    if (p.text.empty()) throw Error("empty piece at id " + std::to_string(id));
    if (!std::isfinite(p.log_prob)) throw Error("non-finite log_prob for piece " + p.text);
    if (p.log_prob > 0.0) throw Error("positive log_prob for piece " + p.text);
    const auto marker_pos = p.text.find(meta_.boundary_marker, 1);
    if (marker_pos != std::string::npos) {
      throw Error("boundary marker inside piece " + p.text);
    }
    if (!index_.emplace(p.text, static_cast<int>(id)).second) {
      throw Error("duplicate piece " + p.text);
    }
    if (id >= kNumReserved) {
      max_piece_chars_ = std::max(max_piece_chars_, static_cast<int>(utf8::char_count(p.text)));
    }
  }
}

SubwordVocab SubwordVocab::from_normal_pieces(std::vector<Piece> normal_pieces, VocabMeta meta,
                                              double unk_log_prob) {
  std::vector<Piece> all;
  all.reserve(normal_pieces.size() + kNumReserved);
  for (int id = 0; id < kNumReserved; ++id) {
    all.push_back({std::string(kReservedPieces[id]), id == kUnkId ? unk_log_prob : 0.0});
  }
  for (auto& p : normal_pieces) all.push_back(std::move(p));
  return SubwordVocab(std::move(all), std::move(meta));
}

std::optional<int> SubwordVocab::id_of(std::string_view piece) const {
  auto it = index_.find(piece);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> SubwordVocab::piece_log_prob(std::string_view piece) const {
  auto id = id_of(piece);
  if (!id) return std::nullopt;
  return pieces_[static_cast<std::size_t>(*id)].log_prob;
}

bool SubwordVocab::starts_word(int id) const {
  return !is_reserved(id) && piece(id).starts_with(meta_.boundary_marker);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string serialize_vocab(const SubwordVocab& vocab) {
  std::string out;
  out += "# advsr-vocab 1\n";
  out += "# char_coverage=" + format_double(vocab.meta().char_coverage) + "\n";
  out += "# boundary_marker=" + vocab.meta().boundary_marker + "\n";
  for (const Piece& p : vocab.pieces()) {
    out += p.text;
    out += '\t';
    out += format_double(p.log_prob);
    out += '\n';
  }
  return out;
}

void save_vocab(const SubwordVocab& vocab, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open vocab file for writing: " + path);
  os << serialize_vocab(vocab);
  if (!os) throw Error("failed writing vocab file: " + path);
}

SubwordVocab parse_vocab(std::string_view text) {
  VocabMeta meta;
  std::vector<Piece> pieces;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = body.substr(0, eq);
      const std::string_view value = body.substr(eq + 1);
      if (key == "char_coverage") {
        double v = 0.0;
        auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !(v > 0.0) ||
            v > 1.0) {
          throw ParseError("bad char_coverage header", line_no);
        }
        meta.char_coverage = v;
      } else if (key == "boundary_marker") {
        if (utf8::char_count(value) != 1) throw ParseError("bad boundary_marker header", line_no);
        meta.boundary_marker = std::string(value);
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError("expected piece<TAB>log_prob", line_no);
    }
    const std::string_view piece = line.substr(0, tab);
    const std::string_view num = line.substr(tab + 1);
    if (piece.empty()) throw ParseError("empty piece", line_no);
    double lp = 0.0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), lp);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
      throw ParseError("unparsable log_prob '" + std::string(num) + "'", line_no);
    }
    if (!std::isfinite(lp)) throw ParseError("non-finite log_prob", line_no);
    if (lp > 0.0) throw ParseError("positive log_prob", line_no);
    if (piece.find(meta.boundary_marker, 1) != std::string_view::npos) {
      throw ParseError("boundary marker inside piece", line_no);
    }
    auto [it, inserted] = seen.emplace(std::string(piece), line_no);
    if (!inserted) {
      throw ParseError("duplicate piece '" + std::string(piece) + "' (first seen on line " +
                           std::to_string(it->second) + ")",
                       line_no);
    }
    const std::size_t id = pieces.size();
    if (id < SubwordVocab::kNumReserved && piece != SubwordVocab::kReservedPieces[id]) {
      throw ParseError("expected reserved piece " +
                           std::string(SubwordVocab::kReservedPieces[id]),
                       line_no);
    }
    pieces.push_back({std::string(piece), lp});
  }
  if (pieces.empty()) throw ParseError("no pieces", 0);
  if (pieces.size() < SubwordVocab::kNumReserved) {
    throw ParseError("missing reserved pieces", line_no);
  }
  try {
    return SubwordVocab(std::move(pieces), std::move(meta));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }
}

SubwordVocab load_vocab(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open vocab file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_vocab(ss.str());
}

}  // namespace advsr
