#include "traitgrid/policies.hpp"

#include <deque>

#include "traitgrid/error.hpp"

namespace traitgrid {

void validate(const PolicyConfig& cfg) {
  if (cfg.lazy_period < 2) throw Error(ErrorCode::BadConfig, "lazy_period must be >= 2");
  if (cfg.adaptive_refresh < 1) throw Error(ErrorCode::BadConfig, "adaptive_refresh must be >= 1");
}

std::optional<Cell> FlowField::argmax() const {
  std::optional<Cell> best;
  double best_value = 0.0;
  const auto& v = values_.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > best_value) {
      best_value = v[i];
      best = values_.cell_at(i);
    }
  }
  return best;
}

std::vector<Cell> FlowField::positive_cells() const {
  std::vector<Cell> out;
  const auto& v = values_.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) out.push_back(values_.cell_at(i));
  }
  return out;
}

namespace {

bool passable(const LevelState& s, Cell c, const PathRules& rules) {
  if (s.map->solid(c)) return false;
  if (!rules.hidden_passable && s.hidden_unrevealed(c)) return false;
  return true;
}

bool blocked_by_player(const LevelState& s, Cell c, Cell exempt_a, Cell exempt_b) {
  return c != exempt_a && c != exempt_b && s.occupied(c);
}

}  // namespace

Grid<int> distances_from(const LevelState& s, Cell from, PathRules rules) {
  Grid<int> dist(s.spec->width, s.spec->height, -1);
  if (!dist.contains(from)) return dist;
  std::deque<Cell> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Direction d : kDirectionOrder) {
      const Cell n = neighbor(c, d);
      if (!dist.contains(n) || dist[n] >= 0 || !passable(s, n, rules)) continue;
      if (rules.players_block && blocked_by_player(s, n, from, from)) continue;
      dist[n] = dist[c] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

std::optional<Path> shortest_path(const LevelState& s, Cell from, Cell to, PathRules rules) {
  const Grid<std::uint8_t>& bounds = s.map->walls;
  if (!bounds.contains(from) || !bounds.contains(to)) return std::nullopt;
  if (from == to) return Path{};
  if (!passable(s, to, rules)) return std::nullopt;

  // Distances to `to`; walking downhill in N,E,S,W order yields the canonical path.
  Grid<int> dist(s.spec->width, s.spec->height, -1);
  std::deque<Cell> queue{to};
  dist[to] = 0;
  while (!queue.empty() && dist[from] < 0) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Direction d : kDirectionOrder) {
      const Cell n = neighbor(c, d);
      if (!dist.contains(n) || dist[n] >= 0) continue;
      if (n != from) {
        if (!passable(s, n, rules)) continue;
        if (rules.players_block && blocked_by_player(s, n, from, to)) continue;
      }
      dist[n] = dist[c] + 1;
      queue.push_back(n);
    }
  }
  if (dist[from] < 0) return std::nullopt;

  Path path;
  Cell cur = from;
  while (cur != to) {
    for (Direction d : kDirectionOrder) {
      const Cell n = neighbor(cur, d);
      if (dist.contains(n) && dist[n] >= 0 && dist[n] == dist[cur] - 1) {
        cur = n;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

FlowField flow_field_as_of(const LevelState& s, int as_of_tick) {
  const LevelSpec& spec = *s.spec;
  FlowField field(spec.width, spec.height);
  for (std::size_t i = 0; i < spec.emitters.size(); ++i) {
    const EmitterSpec& e = spec.emitters[i];
    if (e.hidden) {
      const int r = s.map->region_at[e.position];
      const RegionState& rs = s.regions[static_cast<std::size_t>(r)];
      if (!rs.revealed || rs.revealed_tick > as_of_tick) continue;
    }
    const double rate = e.rate.to_double();
    if (rate <= 0.0) continue;
    const int width = 2 * e.spread + 1;
    double survive = 1.0;
    for (int k = 1; k < e.lifetime && survive > 0.0; ++k) {
      const Cell axis = translate(e.position, offset(e.direction), k);
      int valid = 0;
      for (int d = -e.spread; d <= e.spread; ++d) {
        const Cell c = translate(axis, lateral_axis(e.direction), d);
        if (s.map->solid(c)) continue;
        ++valid;
        field[c] += rate * survive / width;
      }
      survive *= static_cast<double>(valid) / width;
    }
  }
  return field;
}

FlowField flow_field(const LevelState& s) { return flow_field_as_of(s, s.tick); }

std::optional<Cell> nearest_flow_cell(const LevelState& s, const FlowField& field, Cell from, PathRules rules) {
  if (field.at(from) > 0.0) return from;
  const Grid<int> dist = distances_from(s, from, rules);
  std::optional<Cell> best;
  int best_dist = -1;
  const auto& d = dist.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0) continue;
    const Cell c = dist.cell_at(i);
    if (field.at(c) <= 0.0) continue;
    if (best_dist < 0 || d[i] < best_dist) {
      best_dist = d[i];
      best = c;
    }
  }
  return best;
}

bool is_legal(const LevelState& s, PlayerId player, std::optional<Direction> move, PathRules rules) {
  const PlayerState* p = s.find_player(player);
  if (!p) return false;
  if (!move) return true;
  const Cell target = neighbor(p->position, *move);
  return passable(s, target, rules) && !s.occupied(target);
}

namespace {

MoveCommand toward(const LevelState& s, const PlayerState& self, Cell target) {
  if (target == self.position) return MoveCommand::Stay(self.player_id);
  const auto path = shortest_path(s, self.position, target);
  if (!path || path->empty() || s.occupied(path->front())) return MoveCommand::Stay(self.player_id);
  return MoveCommand::Move(self.player_id, *direction_between(self.position, path->front()));
}

MoveCommand greedy_step(const LevelState& s, const PlayerState& self) {
  const FlowField field = flow_field(s);
  const auto target = nearest_flow_cell(s, field, self.position);
  if (!target) return MoveCommand::Stay(self.player_id);
  return toward(s, self, *target);
}

}  // namespace

MoveCommand decide(const PolicyConfig& policy, const Observation& obs) {
  const LevelState& s = obs.state;
  const PlayerState* self = s.find_player(obs.self_id);
  if (!self || self->kind.human) return MoveCommand::Stay(obs.self_id);
  const PlayerState* subject = s.find_player(obs.subject_id);

  switch (policy.kind) {
    case PolicyKind::Lazy:
      if (s.tick % policy.lazy_period != 0) return MoveCommand::Stay(self->player_id);
      return greedy_step(s, *self);

    case PolicyKind::Greedy:
      return greedy_step(s, *self);

    case PolicyKind::Imitator: {
      if (!subject || !subject->last_move || !is_legal(s, self->player_id, subject->last_move)) {
        return MoveCommand::Stay(self->player_id);
      }
      return MoveCommand::Move(self->player_id, *subject->last_move);
    }

    case PolicyKind::Adaptive: {
      const int refresh_tick = s.tick - s.tick % policy.adaptive_refresh;
      const auto target = flow_field_as_of(s, refresh_tick).argmax();
      if (!target) return MoveCommand::Stay(self->player_id);
      return toward(s, *self, *target);
    }

    case PolicyKind::Irritator: {
      if (!subject) return MoveCommand::Stay(self->player_id);
      const FlowField field = flow_field(s);
      const auto goal = nearest_flow_cell(s, field, subject->position);
      if (!goal || *goal == subject->position) return MoveCommand::Stay(self->player_id);
      const auto predicted = shortest_path(s, subject->position, *goal);
      if (!predicted) return MoveCommand::Stay(self->player_id);
      for (Cell c : *predicted) {
        if (c == self->position) return MoveCommand::Stay(self->player_id);
        if (s.occupied(c)) continue;
        const auto path = shortest_path(s, self->position, c);
        if (!path || path->empty()) return MoveCommand::Stay(self->player_id);
        return MoveCommand::Move(self->player_id, *direction_between(self->position, path->front()));
      }
      return MoveCommand::Stay(self->player_id);
    }
  }
  return MoveCommand::Stay(obs.self_id);
}

}  // namespace traitgrid
