#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "navlab/gridworld.hpp"

namespace testsupport {

using navlab::Heading;
using navlab::Pose;
using navlab::Scene;

/// Scene from an ASCII map, top row first ('#' blocked). Row 0 of the text is
/// the highest y so the picture matches N = +y.
inline Scene ascii_scene(const std::vector<std::string>& rows, std::vector<Pose> targets, int dim = 16,
                         double smoothing = 0.5, std::uint64_t feature_seed = 11) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w * h), 0);
  for (int r = 0; r < h; ++r) {
    for (int x = 0; x < w; ++x) mask[static_cast<std::size_t>((h - 1 - r) * w + x)] = rows[r][x] == '#';
  }
  return Scene("ascii", w, h, std::move(mask), smoothing, dim, feature_seed, std::move(targets));
}

inline Scene open_scene(int w, int h, std::vector<Pose> targets, int dim = 16, double smoothing = 0.5,
                        std::uint64_t feature_seed = 11) {
  return Scene("open", w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h), 0), smoothing, dim,
               feature_seed, std::move(targets));
}

/// Independent pose-graph successor: own heading table, own collision rule.
inline Pose oracle_successor(const Scene& s, const Pose& p, int action) {
  static const int dx[4] = {0, 1, 0, -1};
  static const int dy[4] = {1, 0, -1, 0};
  const int h = static_cast<int>(p.heading);
  Pose q = p;
  if (action == 2) {
    q.heading = static_cast<Heading>((h + 3) % 4);
  } else if (action == 3) {
    q.heading = static_cast<Heading>((h + 1) % 4);
  } else {
    const int sgn = action == 0 ? 1 : -1;
    const int nx = p.x + sgn * dx[h], ny = p.y + sgn * dy[h];
    const bool ok = nx >= 0 && ny >= 0 && nx < s.width() && ny < s.height() &&
                    !s.obstacle_mask()[static_cast<std::size_t>(ny * s.width() + nx)];
    if (ok) {
      q.x = nx;
      q.y = ny;
    }
  }
  return q;
}

/// Dijkstra with a binary heap over unit edge weights; -1 when unreachable.
inline int dijkstra(const Scene& s, const Pose& start, const Pose& goal) {
  auto key = [&](const Pose& p) { return (p.y * s.width() + p.x) * 4 + static_cast<int>(p.heading); };
  auto blocked = [&](const Pose& p) { return s.obstacle_mask()[static_cast<std::size_t>(p.y * s.width() + p.x)]; };
  if (blocked(start) || blocked(goal)) return -1;
  const int n = s.width() * s.height() * 4;
  std::vector<int> dist(static_cast<std::size_t>(n), std::numeric_limits<int>::max());
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[key(start)] = 0;
  pq.push({0, key(start)});
  while (!pq.empty()) {
    auto [d, k] = pq.top();
    pq.pop();
    if (d > dist[k]) continue;
    const Pose p{(k / 4) % s.width(), (k / 4) / s.width(), static_cast<Heading>(k % 4)};
    if (p == goal) return d;
    for (int a = 0; a < 4; ++a) {
      const int kk = key(oracle_successor(s, p, a));
      if (d + 1 < dist[kk]) {
        dist[kk] = d + 1;
        pq.push({d + 1, kk});
      }
    }
  }
  return -1;
}

}  // namespace testsupport
