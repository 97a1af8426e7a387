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

// Word-lattice machinery shared by segmentation and vocabulary training. A
// word is a sequence of characters; an edge covers characters [begin, end)
// with one piece.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace advsr::lattice_core {

struct Edge {
  int begin;
  int end;
  int id;
  double log_prob;
};

struct Graph {
  int length = 0;
  // edges_ending[j] holds the edges with end == j, j in [1, length].
  std::vector<std::vector<Edge>> edges_ending;
};

// `lookup(piece) -> std::optional<std::pair<int, double>>` resolves a piece to
// (id, log_prob). Positions with no single-character piece receive an unknown
// edge so every word stays segmentable.
template <class Lookup>
Graph build_graph(const std::vector<std::string_view>& chars, int max_piece_chars,
                  Lookup&& lookup, int unk_id, double unk_log_prob) {
  Graph g;
  g.length = static_cast<int>(chars.size());
  g.edges_ending.assign(chars.size() + 1, {});
  for (int i = 0; i < g.length; ++i) {
    bool has_single = false;
    const char* start = chars[i].data();
    for (int len = 1; len <= max_piece_chars && i + len <= g.length; ++len) {
      const std::string_view& last = chars[i + len - 1];
      const std::string_view piece(start, static_cast<std::size_t>(last.data() + last.size() - start));
      if (auto hit = lookup(piece)) {
        g.edges_ending[i + len].push_back({i, i + len, hit->first, hit->second});
        if (len == 1) has_single = true;
      }
    }
    if (!has_single) g.edges_ending[i + 1].push_back({i, i + 1, unk_id, unk_log_prob});
  }
  return g;
}

struct Path {
  double score = 0.0;
  std::vector<int> ids;
};

// Total order used for ranking segmentations: higher score first, then fewer
// pieces, then the lexicographically smaller id sequence.
inline bool path_before(const Path& a, const Path& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
  return a.ids < b.ids;
}

// Exact k-best paths through the graph, ordered by path_before. Each node
// keeps the k best partial paths ending there; extending an ordered prefix
// list by one edge preserves its order, so the per-node truncation is exact.
inline std::vector<Path> kbest(const Graph& g, std::size_t k) {
  std::vector<std::vector<Path>> best(static_cast<std::size_t>(g.length) + 1);
  best[0].push_back({});
  std::vector<Path> pool;
  for (int j = 1; j <= g.length; ++j) {
    pool.clear();
    for (const Edge& e : g.edges_ending[j]) {
      for (const Path& prefix : best[e.begin]) {
        Path p;
        p.score = prefix.score + e.log_prob;
        p.ids = prefix.ids;
        p.ids.push_back(e.id);
        pool.push_back(std::move(p));
      }
    }
    if (pool.size() > k) {
      std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(),
                        path_before);
      pool.resize(k);
    } else {
      std::sort(pool.begin(), pool.end(), path_before);
    }
    best[j] = pool;
  }
  return std::move(best[g.length]);
}

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Forward-backward marginals. Calls visit(edge, posterior) for every edge and
// returns log Z (the log marginal likelihood of the word).
template <class Visit>
double forward_backward(const Graph& g, Visit&& visit) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(g.length);
  std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
  alpha[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    for (const Edge& e : g.edges_ending[j]) {
      alpha[j] = log_add(alpha[j], alpha[static_cast<std::size_t>(e.begin)] + e.log_prob);
    }
  }
  beta[n] = 0.0;
  for (std::size_t j = n; j >= 1; --j) {
    for (const Edge& e : g.edges_ending[j]) {
      const auto b = static_cast<std::size_t>(e.begin);
      beta[b] = log_add(beta[b], beta[j] + e.log_prob);
    }
  }
  const double log_z = alpha[n];
  for (std::size_t j = 1; j <= n; ++j) {
    for (const Edge& e : g.edges_ending[j]) {
      visit(e, std::exp(alpha[static_cast<std::size_t>(e.begin)] + e.log_prob + beta[j] - log_z));
    }
  }
  return log_z;
}

}  // namespace advsr::lattice_core
