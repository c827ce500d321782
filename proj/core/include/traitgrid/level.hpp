#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/geometry.hpp"
#include "traitgrid/rational.hpp"

namespace traitgrid {

using PlayerId = std::uint32_t;
using Millipoints = std::int64_t;

inline constexpr PlayerId kSubjectId = 0;
inline constexpr Millipoints kMillipointsPerPoint = 1000;

enum class PolicyKind : std::uint8_t { Lazy, Greedy, Imitator, Adaptive, Irritator };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view text);

// Human, or an AI driven by one of the five policies.
struct PlayerKind {
  bool human = false;
  PolicyKind policy = PolicyKind::Greedy;

  static PlayerKind Human() { return {true, PolicyKind::Greedy}; }
  static PlayerKind Ai(PolicyKind p) { return {false, p}; }

  friend bool operator==(const PlayerKind&, const PlayerKind&) = default;
};

std::string to_string(const PlayerKind& kind);
PlayerKind parse_player_kind(std::string_view text);

struct EmitterSpec {
  Cell position;
  Rational rate;
  Direction direction = Direction::East;
  int spread = 0;
  int lifetime = 1;
  bool hidden = false;

  friend bool operator==(const EmitterSpec&, const EmitterSpec&) = default;
};

struct HiddenRegion {
  std::string region_id;
  std::vector<Cell> cells;
  bool revealed = false;

  bool contains(Cell c) const;
  friend bool operator==(const HiddenRegion&, const HiddenRegion&) = default;
};

struct LevelSpec {
  std::string level_id;
  int width = 0;
  int height = 0;
  std::vector<Cell> walls;
  std::vector<EmitterSpec> emitters;
  std::map<PlayerId, Cell> spawn_points;
  // Which engine drives each slot. Kinds must agree across a catalog.
  std::map<PlayerId, PlayerKind> roster;
  std::vector<HiddenRegion> hidden_regions;
  std::vector<Cell> choke_cells;
  std::vector<Cell> yield_cells;
  int tick_limit = 300;
  int points_per_bubble = 1;
  std::uint64_t rng_seed = 0;
  // Set on harder variants; names the canonical slot they replace.
  std::optional<std::string> variant_of;
  // Precomputed best subject route (cells after the spawn), planning levels only.
  std::vector<Cell> optimal_route;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

// Throws Error(InvalidSpec) describing the first violated invariant.
void validate(const LevelSpec& spec);

LevelSpec level_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LevelSpec& spec);
LevelSpec load_level(const std::filesystem::path& path);

// Precomputed wall/emitter occupancy for fast lookups.
struct StaticMap {
  Grid<std::uint8_t> walls;
  Grid<std::int16_t> emitter_at;  // index into spec.emitters, -1 otherwise
  Grid<std::int16_t> region_at;   // index into spec.hidden_regions, -1 otherwise

  explicit StaticMap(const LevelSpec& spec);
  StaticMap() = default;

  bool solid(Cell c) const { return !walls.contains(c) || walls[c] != 0 || emitter_at[c] >= 0; }
};

}  // namespace traitgrid
