#include "traitgrid/harness.hpp"

#include <algorithm>
#include <deque>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "traitgrid/error.hpp"

namespace traitgrid {

using nlohmann::json;

bool is_persona(std::string_view name) {
  return std::find(kPersonaNames.begin(), kPersonaNames.end(), name) != kPersonaNames.end();
}

namespace {

// Sends client frames for a headless subject.
class Driver {
 public:
  explicit Driver(Session& s) : session_(s) {}

  void send(ProtocolMessage m) {
    m.seq = ++seq_;
    session_.handle_message(m);
  }
  std::uint64_t next_seq() const { return seq_ + 1; }

 private:
  Session& session_;
  std::uint64_t seq_ = 0;
};

const PlayerState& subject_of(const LevelState& s) { return *s.find_player(kSubjectId); }

// Highest-flow free cell the subject can reach; ties go to the closer cell, then row, then column.
std::optional<Cell> best_flow_cell(const LevelState& s, PathRules rules) {
  const FlowField field = flow_field(s);
  const Cell from = subject_of(s).position;
  const Grid<int> dist = distances_from(s, from, rules);
  std::optional<Cell> best;
  for (Cell c : field.positive_cells()) {
    if (dist[c] < 0) continue;
    if (const PlayerState* p = s.player_at(c); p && p->player_id != kSubjectId) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double fc = field.at(c);
    const double fb = field.at(*best);
    if (fc > fb || (fc == fb && dist[c] < dist[*best])) best = c;
  }
  return best;
}

class Script {
 public:
  virtual ~Script() = default;
  // Called once at the start of every intermission, before any countdown tick.
  virtual void intermission(Driver& d, const Session& s) {
    if (s.pending_prompt()) d.send(make_difficulty_choice(0, false));
  }
  virtual void level_start(const LevelState&, const std::string& /*slot*/) {}
  virtual std::optional<Direction> move(const LevelState& s, const std::string& /*slot*/) { return forage_best(s); }

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

 protected:
  // One step along a shortest path. When several first steps are equally
  // short one is drawn at random, and after three steps without getting
  // closer a random legal step is taken, so an AI cannot shadow the subject.
  std::optional<Direction> step_toward(const LevelState& s, Cell target, PathRules rules) {
    const Cell from = subject_of(s).position;
    if (from == target) return std::nullopt;
    const auto path = shortest_path(s, from, target, rules);
    if (!path || path->empty()) return std::nullopt;
    stalled_ = path->size() >= last_distance_ ? stalled_ + 1 : 0;
    last_distance_ = path->size();
    std::vector<Direction> options;
    if (stalled_ >= 3) {
      stalled_ = 0;
      for (Direction d : kDirectionOrder) {
        if (is_legal(s, kSubjectId, d, rules)) options.push_back(d);
      }
      if (!options.empty()) return pick(options);
    }
    for (Direction d : kDirectionOrder) {
      if (!is_legal(s, kSubjectId, d, rules)) continue;
      const Cell next = neighbor(from, d);
      if (next == target) return d;
      const auto rest = shortest_path(s, next, target, rules);
      if (rest && rest->size() + 1 == path->size()) options.push_back(d);
    }
    if (options.empty()) return direction_between(from, path->front());
    return pick(options);
  }

  // Heads for the richest free cell, but holds a cell worth at least half of it.
  std::optional<Direction> forage_best(const LevelState& s, PathRules rules = {}) {
    const auto target = best_flow_cell(s, rules);
    if (!target) return std::nullopt;
    const FlowField field = flow_field(s);
    if (field.at(subject_of(s).position) >= 0.5 * field.at(*target)) return std::nullopt;
    return step_toward(s, *target, rules);
  }

  std::optional<Direction> forage_nearest(const LevelState& s, PathRules rules = {}) {
    const auto target = nearest_flow_cell(s, flow_field(s), subject_of(s).position, rules);
    return target ? step_toward(s, *target, rules) : std::nullopt;
  }

 private:
  Rng rng_;
  std::size_t last_distance_ = 0;
  int stalled_ = 0;

  Direction pick(const std::vector<Direction>& options) {
    return options[static_cast<std::size_t>(rng_.uniform(0, static_cast<int>(options.size()) - 1))];
  }
};

class Idle : public Script {
 public:
  void intermission(Driver&, const Session&) override {}
  std::optional<Direction> move(const LevelState&, const std::string&) override { return std::nullopt; }
};

// Accepts every harder variant and walks every hidden cell before foraging.
class Explorer : public Script {
 public:
  void intermission(Driver& d, const Session& s) override {
    if (s.pending_prompt()) d.send(make_difficulty_choice(0, true));
  }
  void level_start(const LevelState& s, const std::string&) override {
    unvisited_.clear();
    for (const auto& r : s.spec->hidden_regions) {
      for (Cell c : r.cells) {
        if (!s.map->solid(c)) unvisited_.insert(c);
      }
    }
  }
  std::optional<Direction> move(const LevelState& s, const std::string&) override {
    const PathRules rules{.hidden_passable = true};
    unvisited_.erase(subject_of(s).position);
    if (unvisited_.empty()) return forage_best(s, rules);
    const Grid<int> dist = distances_from(s, subject_of(s).position, rules);
    std::optional<Cell> target;
    for (Cell c : unvisited_) {
      if (dist[c] < 0) continue;
      if (!target || dist[c] < dist[*target]) target = c;
    }
    return target ? step_toward(s, *target, rules) : forage_best(s, rules);
  }

 private:
  std::set<Cell> unvisited_;
};

// Keeps to visible cells and declines every harder variant.
class Direct : public Script {};

// No team, no chat; settles on the best cell and stays.
class Hermit : public Script {};

// Teams up with every AI before the first level, chats at every break, and
// keeps moving between neighbouring cells on the first level.
class Socialite : public Script {
 public:
  void intermission(Driver& d, const Session& s) override {
    Script::intermission(d, s);
    if (s.level_index() == 0) {
      d.send(make_team_select(0, s.catalog().ai_players()));
      for (int i = 0; i < 6; ++i) d.send(make_chat(0, i == 0 ? "hi team" : "let's go"));
    } else {
      d.send(make_chat(0, "nice one"));
    }
  }
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    if (slot != "L1") return forage_best(s);
    const FlowField field = flow_field(s);
    const Cell from = subject_of(s).position;
    std::optional<Direction> best;
    double best_flow = -1.0;
    for (Direction d : kDirectionOrder) {
      if (!is_legal(s, kSubjectId, d)) continue;
      const double f = field.at(neighbor(from, d));
      if (f > best_flow) {
        best_flow = f;
        best = d;
      }
    }
    return best;
  }
};

// Heads for the choke cell on the sharing level and holds it.
class Blocker : public Script {
 public:
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    if (slot == "L4" && !s.spec->choke_cells.empty()) return step_toward(s, s.spec->choke_cells.front(), {});
    return forage_best(s);
  }
};

// Takes the nearest yield cell on the sharing level and leaves the choke free.
class Yielder : public Script {
 public:
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    if (slot != "L4" || s.spec->yield_cells.empty()) return forage_best(s);
    const Cell from = subject_of(s).position;
    Cell target = s.spec->yield_cells.front();
    for (Cell c : s.spec->yield_cells) {
      if (manhattan(from, c) < manhattan(from, target)) target = c;
    }
    return step_toward(s, target, {});
  }
};

// Picks the two strongest earners, follows the precomputed route on the
// planning level, and otherwise goes for the richest cell.
class Planner : public Script {
 public:
  void intermission(Driver& d, const Session& s) override {
    Script::intermission(d, s);
    if (s.level_index() != 0) return;
    std::set<PlayerId> picks;
    for (const auto& [id, kind] : s.catalog().roster) {
      if (!kind.human && (kind.policy == PolicyKind::Greedy || kind.policy == PolicyKind::Adaptive)) picks.insert(id);
    }
    d.send(make_team_select(0, picks));
  }
  void level_start(const LevelState&, const std::string&) override { next_ = 0; }
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    const auto& route = s.spec->optimal_route;
    if (slot != "L2" || route.empty()) return forage_best(s);
    const Cell at = subject_of(s).position;
    while (next_ < route.size() && at == route[next_]) ++next_;
    if (next_ >= route.size()) return forage_best(s);
    return direction_between(at, route[next_]);
  }

 private:
  std::size_t next_ = 0;
};

// Always runs for the closest cell with any flow.
class Rusher : public Script {
 public:
  std::optional<Direction> move(const LevelState& s, const std::string&) override { return forage_nearest(s); }
};

// Keeps shoving at an occupied cell in the trap, then gives up on the next level.
class Rager : public Script {
 public:
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    if (slot == "L6") return std::nullopt;
    if (slot != "L5") return forage_best(s);
    const PathRules through_players{.players_block = false};
    const auto target = nearest_flow_cell(s, flow_field(s), subject_of(s).position, through_players);
    return target ? step_toward(s, *target, through_players) : std::nullopt;
  }
};

// In the trap, searches the subject's move sequences against simulated AI
// replies until one frees a collection cell, then follows it.
class Solver : public Script {
 public:
  explicit Solver(PolicyConfig lazy_cfg) : policy_(lazy_cfg) {}

  void level_start(const LevelState& s, const std::string& slot) override {
    plan_.clear();
    expected_.clear();
    if (slot == "L5") replan(s);
  }
  std::optional<Direction> move(const LevelState& s, const std::string& slot) override {
    if (slot != "L5") return forage_best(s);
    const FlowField field = flow_field(s);
    if (field.at(subject_of(s).position) > 0.0) return std::nullopt;
    if (plan_.empty() || expected_.front() != key(s)) replan(s);
    if (plan_.empty()) return std::nullopt;
    const auto d = plan_.front();
    plan_.pop_front();
    expected_.pop_front();
    return d;
  }

 private:
  PolicyConfig policy_;
  std::deque<std::optional<Direction>> plan_;
  std::deque<std::string> expected_;

  std::string key(const LevelState& s) const {
    std::string k;
    for (const auto& p : s.players) {
      k += std::to_string(p.position.row) + "," + std::to_string(p.position.col) + ":" +
           (p.last_move ? std::string(to_string(*p.last_move)) : "-") + ";";
    }
    k += std::to_string(s.tick % policy_.lazy_period);
    return k;
  }

  LevelState simulate(const LevelState& s, std::optional<Direction> d) const {
    std::vector<MoveCommand> cmds;
    for (const auto& p : s.players) {
      if (p.kind.human) {
        cmds.push_back({p.player_id, d});
      } else {
        cmds.push_back(decide(PolicyConfig{p.kind.policy, policy_.lazy_period, policy_.adaptive_refresh},
                              Observation{s, kSubjectId, p.player_id}));
      }
    }
    return step(s, cmds).state;
  }

  void replan(const LevelState& start) {
    plan_.clear();
    expected_.clear();
    constexpr int kMaxDepth = 16;
    const FlowField field = flow_field(start);
    struct Node {
      LevelState state;
      int parent;
      std::optional<Direction> move;
      int depth;
    };
    std::vector<Node> nodes;
    std::unordered_map<std::string, int> seen;
    nodes.push_back({start, -1, std::nullopt, 0});
    seen.emplace(key(start), 0);
    std::array<std::optional<Direction>, 5> options{std::nullopt, Direction::North, Direction::East,
                                                    Direction::South, Direction::West};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].depth >= kMaxDepth || nodes[i].state.finished()) continue;
      for (const auto& d : options) {
        if (d && !is_legal(nodes[i].state, kSubjectId, d)) continue;
        LevelState next = simulate(nodes[i].state, d);
        std::string k = key(next);
        if (seen.contains(k)) continue;
        const bool goal = field.at(subject_of(next).position) > 0.0;
        seen.emplace(std::move(k), static_cast<int>(nodes.size()));
        nodes.push_back({std::move(next), static_cast<int>(i), d, nodes[i].depth + 1});
        if (goal) {
          for (int n = static_cast<int>(nodes.size()) - 1; nodes[n].parent >= 0; n = nodes[n].parent) {
            plan_.push_front(nodes[n].move);
            expected_.push_front(key(nodes[nodes[n].parent].state));
          }
          return;
        }
      }
    }
  }
};

std::unique_ptr<Script> make_script(std::string_view name, const SessionConfig& cfg) {
  if (name == "idle") return std::make_unique<Idle>();
  if (name == "explorer") return std::make_unique<Explorer>();
  if (name == "direct") return std::make_unique<Direct>();
  if (name == "hermit") return std::make_unique<Hermit>();
  if (name == "socialite") return std::make_unique<Socialite>();
  if (name == "blocker") return std::make_unique<Blocker>();
  if (name == "yielder") return std::make_unique<Yielder>();
  if (name == "planner") return std::make_unique<Planner>();
  if (name == "rusher") return std::make_unique<Rusher>();
  if (name == "rager") return std::make_unique<Rager>();
  if (name == "solver") {
    return std::make_unique<Solver>(PolicyConfig{PolicyKind::Lazy, cfg.lazy_period, cfg.adaptive_refresh});
  }
  throw Error(ErrorCode::UnknownPersona, std::string(name));
}

}  // namespace

PersonaSession play_persona(std::string_view name, std::uint64_t seed, std::shared_ptr<const LevelCatalog> catalog,
                            const SessionConfig& base) {
  SessionConfig cfg = base;
  cfg.rng_seed = seed;
  cfg.participant = "persona:" + std::string(name) + ":" + std::to_string(seed);
  auto script = make_script(name, cfg);
  script->reseed(mix_seed(seed, 0x50455253));
  Session s("persona-" + std::string(name) + "-" + std::to_string(seed), std::move(catalog), cfg);
  s.drain();
  Driver d(s);
  d.send(make_join(0, cfg.participant));
  std::optional<std::size_t> briefed;
  std::optional<std::size_t> started;
  while (!s.complete()) {
    if (s.phase() == Phase::Intermission && briefed != s.level_index()) {
      script->intermission(d, s);
      briefed = s.level_index();
    }
    if (s.phase() == Phase::Playing) {
      const LevelState& state = *s.level_state();
      const std::string& slot = s.catalog().levels[s.level_index()].slot;
      if (started != s.level_index()) {
        script->level_start(state, slot);
        started = s.level_index();
      }
      if (const auto dir = script->move(state, slot)) d.send(make_move(0, dir));
    }
    s.advance();
  }
  return {s.telemetry(), s.command_log(), s.final_hash()};
}

PersonaRun run_persona(std::string_view name, std::uint64_t seed, std::shared_ptr<const LevelCatalog> catalog,
                       const ScoringParams& params, const PopulationStore& population) {
  PersonaRun run;
  run.session = play_persona(name, seed, catalog, {});
  PopulationStore store = population.detached();
  run.report = report(run.session.telemetry, *catalog, params, store);
  return run;
}

void bootstrap_population(PopulationStore& store, std::shared_ptr<const LevelCatalog> catalog,
                          const ScoringParams& params, std::uint64_t seed) {
  for (std::string_view name : kBaselinePersonas) {
    const PersonaSession s = play_persona(name, seed, catalog, {});
    report(s.telemetry, *catalog, params, store);
  }
}

FactorReport score_log(const std::filesystem::path& path, const LevelCatalog& catalog, const ScoringParams& params,
                       PopulationStore& store) {
  return report(TelemetryLog::load(path), catalog, params, store);
}

StatsTable export_stats(const PopulationStore& store, const CalibrationParams& cal) {
  if (store.empty()) throw Error(ErrorCode::EmptyPopulation, "population store is empty");
  StatsTable t;
  for (Factor f : kFactors) {
    FactorStats row;
    row.factor = f;
    const std::vector<double> raws = store.values(f);
    const double max_ever = store.max_ever(f);
    double sum = 0.0;
    for (std::size_t i = 0; i < raws.size(); ++i) {
      const double score = calibrate(raws[i], max_ever, cal);
      row.min = i == 0 ? score : std::min(row.min, score);
      row.max = i == 0 ? score : std::max(row.max, score);
      sum += score;
      ++row.deciles[std::min<std::size_t>(9, static_cast<std::size_t>(score / 10.0))];
    }
    row.count = raws.size();
    row.mean = raws.empty() ? 0.0 : sum / static_cast<double>(raws.size());
    t.rows.push_back(row);
  }
  return t;
}

json StatsTable::to_json() const {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"factor", to_code(r.factor)},
                 {"name", to_name(r.factor)},
                 {"count", r.count},
                 {"min", r.min},
                 {"max", r.max},
                 {"mean", r.mean},
                 {"deciles", r.deciles}});
  }
  return j;
}

std::string StatsTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(18) << "factor" << std::right << std::setw(7) << "count" << std::setw(9) << "min"
      << std::setw(9) << "max" << std::setw(9) << "mean" << "  deciles\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << to_name(r.factor) << std::right << std::setw(7) << r.count << std::setw(9)
        << r.min << std::setw(9) << r.max << std::setw(9) << r.mean << " ";
    for (std::size_t d : r.deciles) out << ' ' << d;
    out << '\n';
  }
  return out.str();
}

}  // namespace traitgrid
