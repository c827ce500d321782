#include "traitgrid/world.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>

#include "traitgrid/error.hpp"

namespace traitgrid {

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int Rng::uniform(int lo, int hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              (std::numeric_limits<std::uint64_t>::max() % range);
  std::uint64_t v = next();
  while (v >= limit) v = next();
  return lo + static_cast<int>(v % range);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ (b * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
  return r.next();
}

std::string_view to_string(BlockReason reason) {
  switch (reason) {
    case BlockReason::OffGrid: return "off_grid";
    case BlockReason::Wall: return "wall";
    case BlockReason::Emitter: return "emitter";
    case BlockReason::Occupied: return "occupied";
  }
  return "?";
}

const PlayerState* LevelState::find_player(PlayerId id) const {
  for (const auto& p : players) {
    if (p.player_id == id) return &p;
  }
  return nullptr;
}

const PlayerState* LevelState::player_at(Cell c) const {
  for (const auto& p : players) {
    if (p.position == c) return &p;
  }
  return nullptr;
}

bool LevelState::emitter_active(std::size_t emitter_index) const {
  const Cell pos = spec->emitters[emitter_index].position;
  if (!spec->emitters[emitter_index].hidden) return true;
  const int r = map->region_at[pos];
  return r >= 0 && regions[static_cast<std::size_t>(r)].revealed;
}

int LevelState::region_index(Cell c) const { return map->region_at.contains(c) ? map->region_at[c] : -1; }

bool LevelState::hidden_unrevealed(Cell c) const {
  const int r = region_index(c);
  return r >= 0 && !regions[static_cast<std::size_t>(r)].revealed;
}

LevelState create_level(const LevelSpec& spec) { return create_level(std::make_shared<const LevelSpec>(spec)); }

LevelState create_level(std::shared_ptr<const LevelSpec> spec) {
  validate(*spec);
  LevelState s;
  s.map = std::make_shared<const StaticMap>(*spec);
  s.spec = std::move(spec);
  for (const auto& [slot, cell] : s.spec->spawn_points) {
    s.players.push_back({slot, s.spec->roster.at(slot), cell, 0, std::nullopt});
  }
  s.emission_accumulators.assign(s.spec->emitters.size(), 0);
  for (const auto& r : s.spec->hidden_regions) s.regions.push_back({r.revealed, r.revealed ? 0 : -1});
  s.rng = Rng(s.spec->rng_seed);
  return s;
}

namespace {

void mark_revealed(LevelState& s, std::size_t region, PlayerId who, std::vector<WorldEvent>* events) {
  auto& r = s.regions[region];
  if (r.revealed) return;
  r.revealed = true;
  r.revealed_tick = s.tick + 1;
  if (events) events->push_back(RevealEvent{s.spec->hidden_regions[region].region_id, who});
}

}  // namespace

StepResult step(LevelState state, std::span<const MoveCommand> commands) {
  if (state.finished()) {
    throw Error(ErrorCode::LevelFinished, state.spec->level_id + " reached tick " + std::to_string(state.tick));
  }
  const LevelSpec& spec = *state.spec;
  const StaticMap& map = *state.map;

  std::vector<const MoveCommand*> by_player(state.players.size(), nullptr);
  for (const auto& cmd : commands) {
    auto it = std::find_if(state.players.begin(), state.players.end(),
                           [&](const PlayerState& p) { return p.player_id == cmd.player_id; });
    if (it == state.players.end()) {
      throw Error(ErrorCode::UnknownPlayer, "command for player " + std::to_string(cmd.player_id));
    }
    auto& slot = by_player[static_cast<std::size_t>(it - state.players.begin())];
    if (slot) throw Error(ErrorCode::DuplicateCommand, "player " + std::to_string(cmd.player_id));
    slot = &cmd;
  }

  std::vector<WorldEvent> events;

  // (1) emission
  const std::size_t pre_existing = state.bubbles.size();
  for (std::size_t i = 0; i < spec.emitters.size(); ++i) {
    const EmitterSpec& e = spec.emitters[i];
    if (e.rate.num == 0 || !state.emitter_active(i)) continue;
    auto& acc = state.emission_accumulators[i];
    acc += e.rate.num;
    const std::int64_t n = acc / e.rate.den;
    acc -= n * e.rate.den;
    for (std::int64_t k = 0; k < n; ++k) {
      state.bubbles.push_back({e.position, e.direction, 0, static_cast<int>(i)});
      events.push_back(SpawnEvent{static_cast<int>(i), e.position});
      ++state.bubbles_spawned;
    }
  }

  // (2) drift: bubbles sit on the emitter axis at distance == age, re-jittered laterally each tick
  std::vector<Bubble> survivors;
  survivors.reserve(state.bubbles.size());
  for (std::size_t i = 0; i < state.bubbles.size(); ++i) {
    Bubble b = state.bubbles[i];
    if (i < pre_existing) {
      const EmitterSpec& e = spec.emitters[static_cast<std::size_t>(b.emitter_id)];
      const Cell last = b.position;
      b.age += 1;
      bool expired = b.age >= e.lifetime;
      if (!expired) {
        const int d = e.spread > 0 ? state.rng.uniform(-e.spread, e.spread) : 0;
        b.position = translate(translate(e.position, offset(e.direction), b.age), lateral_axis(e.direction), d);
        expired = map.solid(b.position);
      }
      if (expired) {
        events.push_back(ExpireEvent{b.emitter_id, last});
        ++state.bubbles_expired;
        continue;
      }
    }
    survivors.push_back(b);
  }
  state.bubbles = std::move(survivors);

  // (3) moves, ascending player id
  Grid<std::int16_t> occupant(spec.width, spec.height, -1);
  for (std::size_t i = 0; i < state.players.size(); ++i) occupant[state.players[i].position] = static_cast<std::int16_t>(i);
  for (std::size_t i = 0; i < state.players.size(); ++i) {
    PlayerState& p = state.players[i];
    const MoveCommand* cmd = by_player[i];
    if (!cmd || !cmd->move) {
      p.last_move.reset();
      continue;
    }
    const Direction d = *cmd->move;
    const Cell target = neighbor(p.position, d);
    std::optional<BlockReason> blocked;
    if (!map.walls.contains(target)) {
      blocked = BlockReason::OffGrid;
    } else if (map.walls[target]) {
      blocked = BlockReason::Wall;
    } else if (map.emitter_at[target] >= 0) {
      blocked = BlockReason::Emitter;
    } else if (occupant[target] >= 0) {
      blocked = BlockReason::Occupied;
    }
    if (blocked) {
      events.push_back(BlockEvent{p.player_id, p.position, d, *blocked});
      p.last_move.reset();
      continue;
    }
    occupant[p.position] = -1;
    occupant[target] = static_cast<std::int16_t>(i);
    events.push_back(MoveEvent{p.player_id, p.position, target, d});
    p.position = target;
    p.last_move = d;
    if (p.kind.human) {
      const int r = state.region_index(target);
      if (r >= 0) mark_revealed(state, static_cast<std::size_t>(r), p.player_id, &events);
    }
  }

  // (4) collection
  std::vector<int> collected(state.players.size(), 0);
  std::vector<Bubble> remaining;
  remaining.reserve(state.bubbles.size());
  for (const Bubble& b : state.bubbles) {
    const int who = occupant[b.position];
    if (who >= 0) {
      ++collected[static_cast<std::size_t>(who)];
    } else {
      remaining.push_back(b);
    }
  }
  state.bubbles = std::move(remaining);
  for (std::size_t i = 0; i < state.players.size(); ++i) {
    if (collected[i] == 0) continue;
    PlayerState& p = state.players[i];
    const Millipoints pts = Millipoints{collected[i]} * spec.points_per_bubble * kMillipointsPerPoint;
    p.raw_points += pts;
    state.bubbles_collected += static_cast<std::uint64_t>(collected[i]);
    events.push_back(CollectEvent{p.player_id, p.position, collected[i], pts});
  }

  // (5)
  state.tick += 1;
  return {std::move(state), std::move(events)};
}

LevelState reveal_region(LevelState state, const std::string& region_id) {
  for (std::size_t i = 0; i < state.spec->hidden_regions.size(); ++i) {
    if (state.spec->hidden_regions[i].region_id == region_id) {
      mark_revealed(state, i, kSubjectId, nullptr);
      return state;
    }
  }
  throw Error(ErrorCode::UnknownRegion, region_id);
}

namespace {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    auto u = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(u & 0xff));
      u >>= 8;
    }
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

}  // namespace

std::vector<std::uint8_t> canonical_bytes(const LevelState& s) {
  ByteWriter w;
  w.put_string("TGS1");
  w.put_string(s.spec->level_id);
  w.put(static_cast<std::uint64_t>(s.tick));
  w.put(s.rng.state());
  w.put(static_cast<std::uint32_t>(s.players.size()));
  for (const auto& p : s.players) {
    w.put(static_cast<std::uint32_t>(p.player_id));
    w.put(static_cast<std::int32_t>(p.position.row));
    w.put(static_cast<std::int32_t>(p.position.col));
    w.put(static_cast<std::int64_t>(p.raw_points));
    w.put(static_cast<std::uint8_t>(p.last_move ? static_cast<std::uint8_t>(*p.last_move) : 0xff));
  }
  w.put(static_cast<std::uint32_t>(s.bubbles.size()));
  for (const auto& b : s.bubbles) {
    w.put(static_cast<std::int32_t>(b.position.row));
    w.put(static_cast<std::int32_t>(b.position.col));
    w.put(static_cast<std::uint8_t>(b.heading));
    w.put(static_cast<std::uint32_t>(b.age));
    w.put(static_cast<std::uint32_t>(b.emitter_id));
  }
  w.put(static_cast<std::uint32_t>(s.emission_accumulators.size()));
  for (auto a : s.emission_accumulators) w.put(static_cast<std::int64_t>(a));
  w.put(static_cast<std::uint32_t>(s.regions.size()));
  for (const auto& r : s.regions) {
    w.put(static_cast<std::uint8_t>(r.revealed ? 1 : 0));
    w.put(static_cast<std::int32_t>(r.revealed_tick));
  }
  return w.take();
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t snapshot_hash(const LevelState& state) { return fnv1a64(canonical_bytes(state)); }

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace traitgrid
