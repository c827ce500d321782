#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "traitgrid/level.hpp"

namespace traitgrid {

// SplitMix64. One word of state keeps snapshots canonical and cheap to hash.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next();
  // Uniform integer in [lo, hi], unbiased (rejection sampling).
  int uniform(int lo, int hi);

  std::uint64_t state() const { return state_; }
  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t state_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

struct Bubble {
  Cell position;
  Direction heading = Direction::East;
  int age = 0;
  int emitter_id = 0;

  friend bool operator==(const Bubble&, const Bubble&) = default;
};

struct PlayerState {
  PlayerId player_id = 0;
  PlayerKind kind;
  Cell position;
  Millipoints raw_points = 0;
  // Direction actually moved on the most recent tick; cleared on Stay or a blocked move.
  std::optional<Direction> last_move;

  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

struct RegionState {
  bool revealed = false;
  // First tick at which the region counts as revealed (state.tick after the reveal step).
  int revealed_tick = -1;

  friend bool operator==(const RegionState&, const RegionState&) = default;
};

struct LevelState {
  std::shared_ptr<const LevelSpec> spec;
  std::shared_ptr<const StaticMap> map;
  int tick = 0;
  std::vector<PlayerState> players;  // ascending player_id
  std::vector<Bubble> bubbles;
  std::vector<std::int64_t> emission_accumulators;  // numerator over the emitter rate's denominator
  std::vector<RegionState> regions;
  Rng rng;
  std::uint64_t bubbles_spawned = 0;
  std::uint64_t bubbles_collected = 0;
  std::uint64_t bubbles_expired = 0;

  const PlayerState* find_player(PlayerId id) const;
  const PlayerState* player_at(Cell c) const;
  bool occupied(Cell c) const { return player_at(c) != nullptr; }
  bool emitter_active(std::size_t emitter_index) const;
  // -1 when the cell lies outside every hidden region.
  int region_index(Cell c) const;
  bool hidden_unrevealed(Cell c) const;
  bool finished() const { return tick >= spec->tick_limit; }
};

struct MoveCommand {
  PlayerId player_id = 0;
  std::optional<Direction> move;  // nullopt means Stay

  static MoveCommand Stay(PlayerId p) { return {p, std::nullopt}; }
  static MoveCommand Move(PlayerId p, Direction d) { return {p, d}; }
  friend bool operator==(const MoveCommand&, const MoveCommand&) = default;
};

enum class BlockReason : std::uint8_t { OffGrid, Wall, Emitter, Occupied };
std::string_view to_string(BlockReason reason);

struct SpawnEvent {
  int emitter_id;
  Cell cell;
};
struct ExpireEvent {
  int emitter_id;
  Cell last_cell;
};
struct MoveEvent {
  PlayerId player;
  Cell from;
  Cell to;
  Direction direction;
};
struct BlockEvent {
  PlayerId player;
  Cell at;
  Direction direction;
  BlockReason reason;
};
struct CollectEvent {
  PlayerId player;
  Cell cell;
  int count;
  Millipoints points;
};
struct RevealEvent {
  std::string region_id;
  PlayerId player;
};

using WorldEvent = std::variant<SpawnEvent, ExpireEvent, MoveEvent, BlockEvent, CollectEvent, RevealEvent>;

struct StepResult {
  LevelState state;
  std::vector<WorldEvent> events;
};

// Throws InvalidSpec. Players are created for every spawn slot, kinds from the roster.
LevelState create_level(const LevelSpec& spec);
LevelState create_level(std::shared_ptr<const LevelSpec> spec);

// One simulation tick. Phase order: emission, drift, moves (ascending id),
// collection, tick increment. Throws DuplicateCommand, UnknownPlayer, LevelFinished.
StepResult step(LevelState state, std::span<const MoveCommand> commands);

// Idempotent; throws UnknownRegion. step() calls this when the subject enters a region.
LevelState reveal_region(LevelState state, const std::string& region_id);

// Canonical little-endian serialization of the dynamic state; see README for the layout.
std::vector<std::uint8_t> canonical_bytes(const LevelState& state);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t snapshot_hash(const LevelState& state);
std::string hash_hex(std::uint64_t hash);

}  // namespace traitgrid
