#pragma once

// Independent reference implementations. They share no code with the library
// beyond the plain data types, so agreement is evidence rather than tautology.

#include <cmath>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "traitgrid/level.hpp"
#include "traitgrid/telemetry.hpp"

namespace tgtest::oracle {

using traitgrid::Cell;
using traitgrid::LevelSpec;

// Solid = outside the grid, a wall, or an emitter cell.
inline std::vector<std::vector<bool>> solid_grid(const LevelSpec& spec) {
  std::vector<std::vector<bool>> solid(static_cast<std::size_t>(spec.height),
                                       std::vector<bool>(static_cast<std::size_t>(spec.width), false));
  for (Cell w : spec.walls) solid[static_cast<std::size_t>(w.row)][static_cast<std::size_t>(w.col)] = true;
  for (const auto& e : spec.emitters) {
    solid[static_cast<std::size_t>(e.position.row)][static_cast<std::size_t>(e.position.col)] = true;
  }
  return solid;
}

// Plain BFS distance ignoring players. -1 when unreachable.
inline int bfs_distance(const LevelSpec& spec, Cell from, Cell to, const std::set<Cell>& blocked = {}) {
  const auto solid = solid_grid(spec);
  auto open = [&](Cell c) {
    return c.row >= 0 && c.col >= 0 && c.row < spec.height && c.col < spec.width &&
           !solid[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)] && !blocked.contains(c);
  };
  if (!open(to) && !(from == to)) return -1;
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(spec.height),
                                     std::vector<int>(static_cast<std::size_t>(spec.width), -1));
  std::queue<Cell> q;
  q.push(from);
  dist[static_cast<std::size_t>(from.row)][static_cast<std::size_t>(from.col)] = 0;
  const int dr[4] = {-1, 0, 1, 0};
  const int dc[4] = {0, 1, 0, -1};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    if (c == to) return dist[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)];
    for (int k = 0; k < 4; ++k) {
      const Cell n{c.row + dr[k], c.col + dc[k]};
      if (!open(n)) continue;
      auto& d = dist[static_cast<std::size_t>(n.row)][static_cast<std::size_t>(n.col)];
      if (d >= 0) continue;
      d = dist[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)] + 1;
      q.push(n);
    }
  }
  return -1;
}

// Term-by-term evaluation written straight from the factor formula.
inline double factor_raw(const std::vector<traitgrid::ScenarioScore>& scores, double alpha, double beta,
                         double gamma, double theta, double s_max) {
  double total = 0.0;
  for (const auto& s : scores) {
    if (s.player_score == 0.0) continue;
    const double first = std::pow(s.player_score / std::pow(1.0 + s.team_score, gamma), alpha);
    const double second = std::pow(1.0 - s.player_score / (1.0 + s.total_score), beta);
    const double third = std::pow(static_cast<double>(s.team_size), theta);
    total += s.weight * first * second * third;
  }
  return total / s_max;
}

// Endpoint-corrected logistic, written from its definition.
inline double calibrated(double raw, double max_ever, double k, double x0) {
  if (max_ever <= 0.0) return 0.0;
  const double x = std::min(1.0, std::max(0.0, raw / max_ever));
  auto sigma = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double lo = sigma(-k * x0);
  const double hi = sigma(k * (1.0 - x0));
  return 100.0 * (sigma(k * (x - x0)) - lo) / (hi - lo);
}

}  // namespace tgtest::oracle
