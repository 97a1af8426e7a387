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

#include "advsr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "advsr/error.hpp"

namespace advsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'S', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) throw ParseError(std::string("checkpoint truncated reading ") + what, 0);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) throw ParseError(std::string("checkpoint truncated reading ") + what, 0);
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  const ModelConfig& c = params.config();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string tag = kArchitectureTag;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
  out += tag;
  for (int v : {c.vocab_size, c.d_model, c.heads, c.ffn_dim, c.encoder_layers, c.decoder_layers, c.max_len}) {
    put<std::int32_t>(out, v);
  }
  put<std::uint8_t>(out, c.positions ? 1 : 0);
  const auto vals = params.values();
  put<std::uint64_t>(out, vals.size());
  out.append(reinterpret_cast<const char*>(vals.data()), vals.size_bytes());
  put<std::uint64_t>(out, fnv1a(vals.data(), vals.size_bytes()));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string data = ss.str();
  Reader r(data);
  if (r.bytes(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw ParseError("not a checkpoint file (bad magic)", 0);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  const auto tag_len = r.get<std::uint32_t>("tag length");
  if (r.bytes(tag_len, "tag") != kArchitectureTag) throw ParseError("unknown architecture tag", 0);
  ModelConfig c;
  c.vocab_size = r.get<std::int32_t>("vocab_size");
  c.d_model = r.get<std::int32_t>("d_model");
  c.heads = r.get<std::int32_t>("heads");
  c.ffn_dim = r.get<std::int32_t>("ffn_dim");
  c.encoder_layers = r.get<std::int32_t>("encoder_layers");
  c.decoder_layers = r.get<std::int32_t>("decoder_layers");
  c.max_len = r.get<std::int32_t>("max_len");
  c.positions = r.get<std::uint8_t>("positions") != 0;
  try {
    c.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what(), 0);
  }
  if (expected && !(*expected == c)) {
    throw Error("checkpoint dimensions do not match the configuration (checkpoint d_model=" +
                std::to_string(c.d_model) + " vocab=" + std::to_string(c.vocab_size) +
                ", expected d_model=" + std::to_string(expected->d_model) +
                " vocab=" + std::to_string(expected->vocab_size) + ")");
  }
  ModelParams params(c);
  const auto count = r.get<std::uint64_t>("parameter count");
  if (count != params.values().size()) {
    throw ParseError("parameter count " + std::to_string(count) + " does not match the header dimensions", 0);
  }
  const auto blob = r.bytes(count * sizeof(double), "parameters");
  const auto hash = r.get<std::uint64_t>("checksum");
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", 0);
  if (hash != fnv1a(blob.data(), blob.size())) throw ParseError("checkpoint checksum mismatch", 0);
  std::memcpy(params.values().data(), blob.data(), blob.size());
  return params;
}

}  // namespace advsr
