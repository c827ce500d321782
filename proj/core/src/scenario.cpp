#include "traitgrid/scenario.hpp"

#include <algorithm>
#include <fstream>

#include "traitgrid/error.hpp"
#include "traitgrid/policies.hpp"

namespace traitgrid {

using nlohmann::json;

std::string_view to_code(Factor f) {
  switch (f) {
    case Factor::Openness: return "O";
    case Factor::Conscientiousness: return "C";
    case Factor::Extraversion: return "E";
    case Factor::Agreeableness: return "A";
    case Factor::Neuroticism: return "N";
  }
  return "?";
}

std::string_view to_name(Factor f) {
  switch (f) {
    case Factor::Openness: return "Openness";
    case Factor::Conscientiousness: return "Conscientiousness";
    case Factor::Extraversion: return "Extraversion";
    case Factor::Agreeableness: return "Agreeableness";
    case Factor::Neuroticism: return "Neuroticism";
  }
  return "?";
}

std::optional<Factor> parse_factor(std::string_view text) {
  for (Factor f : kFactors) {
    if (to_code(f) == text || to_name(f) == text) return f;
  }
  return std::nullopt;
}

double ScenarioInstrument::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return (it != params.end() && it->is_number()) ? it->get<double>() : fallback;
}

const CatalogEntry& LevelCatalog::entry(std::string_view slot) const {
  for (const auto& e : levels) {
    if (e.slot == slot) return e;
  }
  throw Error(ErrorCode::MissingCanonicalLevel, std::string(slot));
}

std::optional<std::size_t> LevelCatalog::slot_index(std::string_view slot) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].slot == slot) return i;
  }
  return std::nullopt;
}

const LevelSpec* LevelCatalog::find_level(std::string_view level_id) const {
  for (const auto& e : levels) {
    if (e.base && e.base->level_id == level_id) return e.base.get();
    if (e.variant && e.variant->level_id == level_id) return e.variant.get();
  }
  return nullptr;
}

std::set<PlayerId> LevelCatalog::ai_players() const {
  std::set<PlayerId> out;
  for (const auto& [id, kind] : roster) {
    if (!kind.human) out.insert(id);
  }
  return out;
}

std::vector<const ScenarioInstrument*> LevelCatalog::instruments_for(Factor f) const {
  std::vector<const ScenarioInstrument*> out;
  for (const auto& i : instruments) {
    if (i.factor == f) out.push_back(&i);
  }
  return out;
}

std::vector<ScenarioInstrument> instruments_from_json(const json& j) {
  std::vector<ScenarioInstrument> out;
  try {
    for (const auto& item : j.at("instruments")) {
      ScenarioInstrument i;
      i.instrument_id = item.at("id").get<std::string>();
      const auto f = parse_factor(item.at("factor").get<std::string>());
      if (!f) throw Error(ErrorCode::InvalidSpec, "instrument " + i.instrument_id + ": unknown factor");
      i.factor = *f;
      i.level_slot = item.at("level").get<std::string>();
      i.weight = item.at("weight").get<double>();
      i.cap = item.value("cap", 100.0);
      i.feature_map = item.at("feature_map").get<std::string>();
      i.params = item.value("params", json::object());
      out.push_back(std::move(i));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("instruments: ") + e.what());
  }
  return out;
}

json to_json(const ScenarioInstrument& i) {
  return {{"id", i.instrument_id},
          {"factor", to_code(i.factor)},
          {"level", i.level_slot},
          {"weight", i.weight},
          {"cap", i.cap},
          {"feature_map", i.feature_map},
          {"params", i.params}};
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, what);
}

void check_planning_level(const LevelSpec& s) {
  require(!s.optimal_route.empty(), s.level_id + ": planning level needs an optimal_route");
  const Cell start = s.spawn_points.at(kSubjectId);
  Cell prev = start;
  for (Cell c : s.optimal_route) {
    require(manhattan(prev, c) == 1, s.level_id + ": optimal_route is not a connected path");
    prev = c;
  }
}

void check_choke_level(const LevelSpec& s) {
  require(s.choke_cells.size() == 1, s.level_id + ": needs exactly one choke cell");
  require(s.yield_cells.size() == 2, s.level_id + ": needs exactly two yield cells");
  const Cell b = s.choke_cells.front();
  for (Cell a : s.yield_cells) require(manhattan(a, b) == 1, s.level_id + ": yield cells must flank the choke cell");
  const Cell a = s.yield_cells[0];
  const Cell c = s.yield_cells[1];
  require(a.row + c.row == 2 * b.row && a.col + c.col == 2 * b.col,
          s.level_id + ": yield cells must sit on opposite sides of the choke cell");
}

void check_trap_level(const LevelSpec& s) {
  const LevelState state = create_level(s);
  const std::vector<Cell> collect = flow_field(state).positive_cells();
  bool has_imitator = false;
  std::size_t ai_count = 0;
  for (const auto& p : state.players) {
    if (p.kind.human) {
      require(std::find(collect.begin(), collect.end(), p.position) == collect.end(),
              s.level_id + ": subject must not start on a collection cell");
      continue;
    }
    ++ai_count;
    has_imitator |= p.kind.policy == PolicyKind::Imitator;
    require(std::find(collect.begin(), collect.end(), p.position) != collect.end(),
            s.level_id + ": every AI must start on a collection cell");
  }
  require(collect.size() == ai_count, s.level_id + ": collection cells must be exactly the AI spawn cells");
  require(has_imitator, s.level_id + ": an imitator must hold one collection cell");
}

}  // namespace

void validate(const LevelCatalog& catalog) {
  for (std::string_view slot : kCanonicalSlots) {
    if (!catalog.slot_index(slot)) throw Error(ErrorCode::MissingCanonicalLevel, std::string(slot));
  }
  for (std::size_t i = 0; i < kCanonicalSlots.size(); ++i) {
    require(catalog.levels[i].slot == kCanonicalSlots[i], "catalog levels out of canonical order");
  }
  for (const auto& e : catalog.levels) {
    for (const LevelSpec* spec : {e.base.get(), e.variant.get()}) {
      if (!spec) continue;
      require(spec->spawn_points.contains(kSubjectId), spec->level_id + ": subject slot 0 missing");
      for (const auto& [slot, kind] : spec->roster) {
        const auto it = catalog.roster.find(slot);
        require(it != catalog.roster.end() && it->second == kind,
                spec->level_id + ": roster slot " + std::to_string(slot) + " disagrees with the catalog");
      }
    }
  }
  const auto& l1 = *catalog.entry("L1").base;
  require(l1.spawn_points.size() == catalog.roster.size(), "L1 must field every rostered player");
  check_planning_level(*catalog.entry("L2").base);
  for (const LevelSpec* s : {catalog.entry("L3").base.get(), catalog.entry("L3").variant.get()}) {
    if (s) require(!s->hidden_regions.empty(), s->level_id + ": needs at least one hidden region");
  }
  check_choke_level(*catalog.entry("L4").base);
  check_trap_level(*catalog.entry("L5").base);

  std::map<Factor, int> psi;
  for (const auto& i : catalog.instruments) {
    require(catalog.slot_index(i.level_slot).has_value(), "instrument " + i.instrument_id + " references unknown level");
    require(i.weight >= 0.0, "instrument " + i.instrument_id + ": weight must be >= 0");
    require(i.cap > 0.0, "instrument " + i.instrument_id + ": cap must be > 0");
    require(std::find(kFeatureMaps.begin(), kFeatureMaps.end(), i.feature_map) != kFeatureMaps.end(),
            "instrument " + i.instrument_id + ": unknown feature_map " + i.feature_map);
    ++psi[i.factor];
  }
  for (Factor f : kFactors) {
    require(psi[f] >= 2, std::string("factor ") + std::string(to_name(f)) + " needs at least two instruments");
  }
}

LevelCatalog load_catalog(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::InvalidSpec, "catalog directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  LevelCatalog catalog;
  catalog.source = dir;
  std::map<std::string, std::shared_ptr<const LevelSpec>> bases;
  std::map<std::string, std::shared_ptr<const LevelSpec>> variants;
  bool have_instruments = false;
  for (const auto& path : files) {
    if (path.filename() == "instruments.json") {
      std::ifstream in(path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidSpec, path.string() + ": " + e.what());
      }
      catalog.instruments = instruments_from_json(j);
      have_instruments = true;
      continue;
    }
    auto spec = std::make_shared<const LevelSpec>(load_level(path));
    if (spec->variant_of) {
      require(variants.emplace(*spec->variant_of, spec).second, "two variants for " + *spec->variant_of);
    } else {
      require(bases.emplace(spec->level_id, spec).second, "duplicate level " + spec->level_id);
    }
  }
  require(have_instruments, "catalog has no instruments.json");

  for (std::string_view slot : kCanonicalSlots) {
    const auto it = bases.find(std::string(slot));
    if (it == bases.end()) throw Error(ErrorCode::MissingCanonicalLevel, std::string(slot));
    CatalogEntry e{std::string(slot), it->second, nullptr};
    if (const auto v = variants.find(e.slot); v != variants.end()) {
      e.variant = v->second;
      variants.erase(v);
    }
    catalog.levels.push_back(std::move(e));
    bases.erase(it);
  }
  require(bases.empty(), "unexpected non-canonical level " + (bases.empty() ? "" : bases.begin()->first));
  require(variants.empty(), "variant for unknown slot " + (variants.empty() ? "" : variants.begin()->first));
  catalog.roster = catalog.levels.front().base->roster;
  validate(catalog);
  return catalog;
}

std::optional<DifficultyPrompt> DifficultyOffers::offer(const LevelCatalog& catalog, const std::string& slot) {
  const CatalogEntry& e = catalog.entry(slot);
  if (!e.variant) throw Error(ErrorCode::NoVariant, slot);
  if (!offered_.insert(slot).second) return std::nullopt;
  return DifficultyPrompt{slot, e.base->level_id, e.variant->level_id};
}

void DifficultyOffers::record_choice(const std::string& slot, bool accepted) {
  if (!pending(slot)) throw Error(ErrorCode::IllegalState, "no difficulty prompt outstanding for " + slot);
  choices_[slot] = accepted;
}

bool DifficultyOffers::pending(const std::string& slot) const {
  return offered_.contains(slot) && !choices_.contains(slot);
}

std::optional<bool> DifficultyOffers::choice(const std::string& slot) const {
  const auto it = choices_.find(slot);
  if (it == choices_.end()) return std::nullopt;
  return it->second;
}

int DifficultyOffers::accepted_count() const {
  return static_cast<int>(std::count_if(choices_.begin(), choices_.end(), [](const auto& kv) { return kv.second; }));
}

Millipoints simulate_route(const LevelSpec& spec, const std::vector<Cell>& route, int wait) {
  LevelState state = create_level(spec);
  std::size_t next = 0;
  std::vector<MoveCommand> commands;
  while (!state.finished()) {
    commands.clear();
    const PlayerState& subject = *state.find_player(kSubjectId);
    while (next < route.size() && subject.position == route[next]) ++next;
    if (state.tick >= wait && next < route.size()) {
      if (const auto d = direction_between(subject.position, route[next])) {
        commands.push_back(MoveCommand::Move(kSubjectId, *d));
      }
    }
    for (const auto& p : state.players) {
      if (p.kind.human) continue;
      commands.push_back(decide(PolicyConfig{p.kind.policy}, Observation{state, kSubjectId, p.player_id}));
    }
    state = step(std::move(state), commands).state;
  }
  return state.find_player(kSubjectId)->raw_points;
}

RouteSearchResult search_optimal_route(const LevelSpec& spec, int max_wait) {
  const LevelState initial = create_level(spec);
  const Cell start = spec.spawn_points.at(kSubjectId);
  const PathRules static_rules{.hidden_passable = true, .players_block = false};
  const FlowField field = flow_field(initial);

  RouteSearchResult best;
  bool have = false;
  const Grid<int> dist = distances_from(initial, start, static_rules);
  for (std::size_t i = 0; i < dist.data().size(); ++i) {
    if (dist.data()[i] <= 0) continue;
    const Cell target = dist.cell_at(i);
    if (field.at(target) <= 0.0) continue;
    const auto path = shortest_path(initial, start, target, static_rules);
    if (!path) continue;
    for (int w = 0; w <= max_wait; ++w) {
      ++best.candidates;
      const Millipoints pts = simulate_route(spec, *path, w);
      const bool better = !have || pts > best.points ||
                          (pts == best.points && (w < best.wait || (w == best.wait && path->size() < best.route.size())));
      if (better) {
        best.route = *path;
        best.wait = w;
        best.points = pts;
        have = true;
      }
    }
  }
  return best;
}

}  // namespace traitgrid
