#include "traitgrid/level.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "traitgrid/error.hpp"

namespace traitgrid {

using nlohmann::json;

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Lazy: return "lazy";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::Imitator: return "imitator";
    case PolicyKind::Adaptive: return "adaptive";
    case PolicyKind::Irritator: return "irritator";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view text) {
  for (PolicyKind k : {PolicyKind::Lazy, PolicyKind::Greedy, PolicyKind::Imitator, PolicyKind::Adaptive,
                       PolicyKind::Irritator}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string to_string(const PlayerKind& kind) {
  return kind.human ? std::string("human") : std::string(to_string(kind.policy));
}

PlayerKind parse_player_kind(std::string_view text) {
  if (text == "human") return PlayerKind::Human();
  if (auto p = parse_policy_kind(text)) return PlayerKind::Ai(*p);
  throw Error(ErrorCode::InvalidSpec, "unknown player kind '" + std::string(text) + "'");
}

bool HiddenRegion::contains(Cell c) const { return std::find(cells.begin(), cells.end(), c) != cells.end(); }

namespace {

void require(bool ok, const LevelSpec& spec, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, spec.level_id + ": " + what);
}

bool in_grid(const LevelSpec& s, Cell c) { return c.row >= 0 && c.col >= 0 && c.row < s.height && c.col < s.width; }

std::string cell_str(Cell c) { return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")"; }

void check_cells(const LevelSpec& s, const std::vector<Cell>& cells, const std::string& what) {
  for (Cell c : cells) require(in_grid(s, c), s, what + " cell " + cell_str(c) + " out of range");
}

}  // namespace

void validate(const LevelSpec& s) {
  require(!s.level_id.empty(), s, "level_id is empty");
  require(s.width > 0 && s.height > 0, s, "width and height must be positive");
  require(s.width <= 4096 && s.height <= 4096, s, "grid too large");
  require(s.tick_limit >= 1, s, "tick_limit must be >= 1");
  require(s.points_per_bubble >= 1, s, "points_per_bubble must be >= 1");

  check_cells(s, s.walls, "wall");
  check_cells(s, s.choke_cells, "choke");
  check_cells(s, s.yield_cells, "yield");
  check_cells(s, s.optimal_route, "route");
  const std::set<Cell> walls(s.walls.begin(), s.walls.end());

  std::set<std::string> region_ids;
  for (const auto& r : s.hidden_regions) {
    require(!r.cells.empty(), s, "hidden region '" + r.region_id + "' has no cells");
    require(region_ids.insert(r.region_id).second, s, "duplicate region id '" + r.region_id + "'");
    check_cells(s, r.cells, "hidden region");
  }

  std::set<Cell> emitter_cells;
  for (const auto& e : s.emitters) {
    require(in_grid(s, e.position), s, "emitter " + cell_str(e.position) + " out of range");
    require(!walls.contains(e.position), s, "emitter on wall " + cell_str(e.position));
    require(emitter_cells.insert(e.position).second, s, "two emitters at " + cell_str(e.position));
    require(e.rate.num >= 0 && e.rate.den > 0, s, "emitter rate must be nonnegative");
    require(e.lifetime >= 1, s, "emitter lifetime must be >= 1");
    require(e.spread >= 0, s, "emitter spread must be >= 0");
    const bool inside = std::any_of(s.hidden_regions.begin(), s.hidden_regions.end(),
                                    [&](const HiddenRegion& r) { return r.contains(e.position); });
    require(inside == e.hidden, s, "emitter " + cell_str(e.position) + " hidden flag disagrees with regions");
  }

  std::set<Cell> spawns;
  for (const auto& [slot, c] : s.spawn_points) {
    require(in_grid(s, c), s, "spawn " + cell_str(c) + " out of range");
    require(!walls.contains(c), s, "spawn on wall " + cell_str(c));
    require(!emitter_cells.contains(c), s, "spawn on emitter " + cell_str(c));
    require(spawns.insert(c).second, s, "spawn collision at " + cell_str(c));
    const auto it = s.roster.find(slot);
    require(it != s.roster.end(), s, "slot " + std::to_string(slot) + " has no roster kind");
    require(!it->second.human || slot == kSubjectId, s, "only slot 0 may be human");
  }
}

LevelSpec level_from_json(const json& j) {
  try {
    LevelSpec s;
    s.level_id = j.at("level_id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.walls = j.value("walls", json::array()).get<std::vector<Cell>>();
    for (const auto& e : j.value("emitters", json::array())) {
      EmitterSpec em;
      em.position = e.at("position").get<Cell>();
      em.rate = e.at("rate").get<Rational>();
      const auto dir = parse_direction(e.at("direction").get<std::string>());
      if (!dir) throw Error(ErrorCode::InvalidSpec, "bad emitter direction " + e.at("direction").dump());
      em.direction = *dir;
      em.spread = e.value("spread", 0);
      em.lifetime = e.at("lifetime").get<int>();
      em.hidden = e.value("hidden", false);
      s.emitters.push_back(em);
    }
    for (const auto& [slot, cell] : j.at("spawn_points").items()) {
      s.spawn_points[static_cast<PlayerId>(std::stoul(slot))] = cell.get<Cell>();
    }
    for (const auto& [slot, kind] : j.at("roster").items()) {
      s.roster[static_cast<PlayerId>(std::stoul(slot))] = parse_player_kind(kind.get<std::string>());
    }
    for (const auto& r : j.value("hidden_regions", json::array())) {
      s.hidden_regions.push_back({r.at("region_id").get<std::string>(), r.at("cells").get<std::vector<Cell>>(),
                                  r.value("revealed", false)});
    }
    s.choke_cells = j.value("choke_cells", json::array()).get<std::vector<Cell>>();
    s.yield_cells = j.value("yield_cells", json::array()).get<std::vector<Cell>>();
    s.tick_limit = j.value("tick_limit", 300);
    s.points_per_bubble = j.value("points_per_bubble", 1);
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    if (j.contains("variant_of") && !j["variant_of"].is_null()) s.variant_of = j["variant_of"].get<std::string>();
    s.optimal_route = j.value("optimal_route", json::array()).get<std::vector<Cell>>();
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("level json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("level json: bad slot id: ") + e.what());
  }
}

json to_json(const LevelSpec& s) {
  json j;
  j["level_id"] = s.level_id;
  j["width"] = s.width;
  j["height"] = s.height;
  j["walls"] = s.walls;
  j["emitters"] = json::array();
  for (const auto& e : s.emitters) {
    j["emitters"].push_back({{"position", e.position},
                             {"rate", e.rate},
                             {"direction", to_string(e.direction)},
                             {"spread", e.spread},
                             {"lifetime", e.lifetime},
                             {"hidden", e.hidden}});
  }
  j["spawn_points"] = json::object();
  for (const auto& [slot, c] : s.spawn_points) j["spawn_points"][std::to_string(slot)] = c;
  j["roster"] = json::object();
  for (const auto& [slot, k] : s.roster) j["roster"][std::to_string(slot)] = to_string(k);
  j["hidden_regions"] = json::array();
  for (const auto& r : s.hidden_regions) {
    j["hidden_regions"].push_back({{"region_id", r.region_id}, {"cells", r.cells}, {"revealed", r.revealed}});
  }
  j["choke_cells"] = s.choke_cells;
  j["yield_cells"] = s.yield_cells;
  j["tick_limit"] = s.tick_limit;
  j["points_per_bubble"] = s.points_per_bubble;
  j["rng_seed"] = s.rng_seed;
  if (s.variant_of) j["variant_of"] = *s.variant_of;
  if (!s.optimal_route.empty()) j["optimal_route"] = s.optimal_route;
  return j;
}

LevelSpec load_level(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidSpec, "cannot open level file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidSpec, path.string() + ": " + e.what());
  }
  return level_from_json(j);
}

StaticMap::StaticMap(const LevelSpec& spec)
    : walls(spec.width, spec.height, 0), emitter_at(spec.width, spec.height, -1), region_at(spec.width, spec.height, -1) {
  for (Cell c : spec.walls) walls[c] = 1;
  for (std::size_t i = 0; i < spec.emitters.size(); ++i) emitter_at[spec.emitters[i].position] = static_cast<std::int16_t>(i);
  for (std::size_t i = 0; i < spec.hidden_regions.size(); ++i) {
    for (Cell c : spec.hidden_regions[i].cells) region_at[c] = static_cast<std::int16_t>(i);
  }
}

}  // namespace traitgrid
