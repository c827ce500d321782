#pragma once

// Level builders and shipped-data accessors shared by the unit and acceptance suites.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "traitgrid/harness.hpp"
#include "traitgrid/level.hpp"
#include "traitgrid/scenario.hpp"
#include "traitgrid/scoring.hpp"
#include "traitgrid/world.hpp"

namespace tgtest {

using namespace traitgrid;

inline std::filesystem::path data_dir() { return TRAITGRID_TEST_DATA_DIR; }

inline std::shared_ptr<const LevelCatalog> shipped_catalog() {
  static const auto catalog = std::make_shared<const LevelCatalog>(load_catalog(data_dir() / "catalog"));
  return catalog;
}

inline const ScoringParams& shipped_params() {
  static const ScoringParams params = load_params(data_dir() / "params.json", *shipped_catalog());
  return params;
}

// The seed-0 baseline population, built once per process.
inline const PopulationStore& baseline_store() {
  static const PopulationStore store = [] {
    PopulationStore s;
    bootstrap_population(s, shipped_catalog(), shipped_params());
    return s;
  }();
  return store;
}

// Open rectangle; slot 0 is the human subject, the rest take `ai` kinds in order.
inline LevelSpec open_level(int width, int height, std::map<PlayerId, Cell> spawns,
                            std::map<PlayerId, PolicyKind> ai = {}) {
  LevelSpec s;
  s.level_id = "T";
  s.width = width;
  s.height = height;
  s.spawn_points = std::move(spawns);
  for (const auto& [slot, cell] : s.spawn_points) {
    (void)cell;
    const auto it = ai.find(slot);
    s.roster[slot] = slot == kSubjectId ? PlayerKind::Human()
                                        : PlayerKind::Ai(it == ai.end() ? PolicyKind::Greedy : it->second);
  }
  s.tick_limit = 1000;
  s.rng_seed = 7;
  return s;
}

inline EmitterSpec emitter(Cell at, Direction d, Rational rate, int lifetime, int spread = 0) {
  EmitterSpec e;
  e.position = at;
  e.direction = d;
  e.rate = rate;
  e.lifetime = lifetime;
  e.spread = spread;
  return e;
}

// Random walls at the given density, keeping `keep` cells open.
inline std::vector<Cell> random_walls(std::mt19937_64& rng, int width, int height, double density,
                                      const std::vector<Cell>& keep) {
  std::bernoulli_distribution wall(density);
  std::vector<Cell> out;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Cell cell{r, c};
      if (std::find(keep.begin(), keep.end(), cell) != keep.end()) continue;
      if (wall(rng)) out.push_back(cell);
    }
  }
  return out;
}

inline std::vector<MoveCommand> all_stay(const LevelState& s) {
  std::vector<MoveCommand> out;
  for (const auto& p : s.players) out.push_back(MoveCommand::Stay(p.player_id));
  return out;
}

}  // namespace tgtest
