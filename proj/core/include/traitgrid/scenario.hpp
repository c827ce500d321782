#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/level.hpp"

namespace traitgrid {

enum class Factor : std::uint8_t { Openness, Conscientiousness, Extraversion, Agreeableness, Neuroticism };

inline constexpr std::array<Factor, 5> kFactors{Factor::Openness, Factor::Conscientiousness, Factor::Extraversion,
                                                Factor::Agreeableness, Factor::Neuroticism};

// Single-letter code: O, C, E, A, N.
std::string_view to_code(Factor f);
std::string_view to_name(Factor f);
std::optional<Factor> parse_factor(std::string_view text);

// Names of the feature maps an instrument may use.
inline constexpr std::array<std::string_view, 13> kFeatureMaps{
    "team_size",    "early_movement", "chat",         "nonperformer", "exploration",
    "difficulty",   "yield_share",    "others_score", "route_overlap", "team_quality",
    "flow_share",   "trap",           "aftermath"};

struct ScenarioInstrument {
  std::string instrument_id;
  Factor factor = Factor::Openness;
  std::string level_slot;  // canonical slot, e.g. "L3"; a played variant counts for its slot
  double weight = 1.0;     // lambda
  double cap = 100.0;      // S_cap, maximum attainable S_P
  std::string feature_map;
  nlohmann::json params = nlohmann::json::object();

  double param(const std::string& key, double fallback) const;
};

struct CatalogEntry {
  std::string slot;
  std::shared_ptr<const LevelSpec> base;
  std::shared_ptr<const LevelSpec> variant;  // null when no harder variant exists
};

inline constexpr std::array<std::string_view, 6> kCanonicalSlots{"L1", "L2", "L3", "L4", "L5", "L6"};

struct LevelCatalog {
  std::vector<CatalogEntry> levels;  // canonical order L1..L6
  std::vector<ScenarioInstrument> instruments;
  std::map<PlayerId, PlayerKind> roster;
  std::filesystem::path source;

  const CatalogEntry& entry(std::string_view slot) const;
  std::optional<std::size_t> slot_index(std::string_view slot) const;
  // Finds a base level or variant by its level_id.
  const LevelSpec* find_level(std::string_view level_id) const;
  std::set<PlayerId> ai_players() const;
  std::vector<const ScenarioInstrument*> instruments_for(Factor f) const;
};

// Scans `dir` for *.json level files in lexicographic order plus
// instruments.json. Throws InvalidSpec, MissingCanonicalLevel.
LevelCatalog load_catalog(const std::filesystem::path& dir);

// Structural checks on an in-memory catalog (also run by load_catalog).
void validate(const LevelCatalog& catalog);

std::vector<ScenarioInstrument> instruments_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioInstrument& i);

// Once-per-level difficulty prompts.
struct DifficultyPrompt {
  std::string slot;
  std::string base_level_id;
  std::string variant_level_id;
};

class DifficultyOffers {
 public:
  // Throws NoVariant. Returns nullopt if this slot was already offered.
  std::optional<DifficultyPrompt> offer(const LevelCatalog& catalog, const std::string& slot);
  // Throws IllegalState when no prompt is outstanding for the slot.
  void record_choice(const std::string& slot, bool accepted);

  bool pending(const std::string& slot) const;
  std::optional<bool> choice(const std::string& slot) const;
  int offered_count() const { return static_cast<int>(offered_.size()); }
  int accepted_count() const;

 private:
  std::set<std::string> offered_;
  std::map<std::string, bool> choices_;
};

// The best subject route on a planning level: for every reachable cell T and
// initial wait w in [0, max_wait], the subject walks the static shortest path
// to T (retrying when blocked) and the level is simulated with all AI
// policies. Returns the route collecting the most bubbles; ties prefer fewer
// waits, then shorter routes, then the smaller target cell.
struct RouteSearchResult {
  std::vector<Cell> route;
  int wait = 0;
  Millipoints points = 0;
  int candidates = 0;
};
RouteSearchResult search_optimal_route(const LevelSpec& spec, int max_wait = 0);

// Plays `route` (cells after spawn) with the subject, all AIs on default policies.
Millipoints simulate_route(const LevelSpec& spec, const std::vector<Cell>& route, int wait = 0);

}  // namespace traitgrid
