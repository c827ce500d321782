#include "traitgrid/telemetry.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "traitgrid/error.hpp"
#include "traitgrid/policies.hpp"

namespace traitgrid {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kEventNames{{
    {EventKind::Move, "Move"},
    {EventKind::Block, "Block"},
    {EventKind::Collect, "Collect"},
    {EventKind::Reveal, "Reveal"},
    {EventKind::TeamSelect, "TeamSelect"},
    {EventKind::Chat, "Chat"},
    {EventKind::DifficultyChoice, "DifficultyChoice"},
    {EventKind::Transfer, "Transfer"},
    {EventKind::LevelEnd, "LevelEnd"},
}};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kEventNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kEventNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

void TelemetryLog::append(TelemetryEvent event) {
  if (event.level_index != closed_level_ + 1) {
    throw Error(ErrorCode::OutOfOrder, "event for level index " + std::to_string(event.level_index) +
                                           " but the open level is " + std::to_string(closed_level_ + 1));
  }
  if (!events_.empty()) {
    const TelemetryEvent& last = events_.back();
    if (last.level_index == event.level_index && event.tick < last.tick) {
      throw Error(ErrorCode::OutOfOrder, "tick " + std::to_string(event.tick) + " after tick " +
                                             std::to_string(last.tick) + " on " + event.level_id);
    }
  }
  event.seq = events_.size();
  if (event.session_id.empty()) event.session_id = header_.session_id;
  if (event.kind == EventKind::LevelEnd) closed_level_ = event.level_index;
  events_.push_back(std::move(event));
}

TelemetryLog record(TelemetryLog log, TelemetryEvent event) {
  log.append(std::move(event));
  return log;
}

std::string event_line(const TelemetryEvent& e) {
  const json j{{"record", "event"},
               {"seq", e.seq},
               {"session", e.session_id},
               {"level_index", e.level_index},
               {"level", e.level_id},
               {"tick", e.tick},
               {"kind", to_string(e.kind)},
               {"payload", e.payload}};
  return j.dump();
}

void TelemetryLog::write_ndjson(std::ostream& out) const {
  const json header{{"record", "header"},
                    {"schema", kTelemetrySchema},
                    {"schema_version", kTelemetrySchemaVersion},
                    {"session_id", header_.session_id},
                    {"participant", header_.participant},
                    {"seed", header_.seed},
                    {"slots", header_.slots}};
  out << header.dump() << '\n';
  for (const auto& e : events_) out << event_line(e) << '\n';
}

std::string TelemetryLog::to_ndjson() const {
  std::ostringstream out;
  write_ndjson(out);
  return out.str();
}

void TelemetryLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write telemetry file " + path.string());
  write_ndjson(out);
}

TelemetryLog TelemetryLog::parse_ndjson(std::istream& in) {
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const bool trailing_newline = !content.empty() && content.back() == '\n';
  std::vector<std::string> lines;
  {
    std::istringstream ss(content);
    std::string line;
    while (std::getline(ss, line)) {
      if (!line.empty()) lines.push_back(line);
    }
  }
  if (lines.empty()) throw Error(ErrorCode::IncompleteLog, "telemetry file is empty");

  auto parse_line = [&](std::size_t i) -> json {
    try {
      return json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      if (i + 1 == lines.size() && !trailing_newline) {
        throw Error(ErrorCode::IncompleteLog, "telemetry truncated at line " + std::to_string(i + 1));
      }
      throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": " + e.what());
    }
  };

  TelemetryLog log;
  try {
    const json h = parse_line(0);
    if (h.value("record", "") != "header" || h.value("schema", "") != kTelemetrySchema) {
      throw Error(ErrorCode::ParseError, "missing telemetry header record");
    }
    if (h.value("schema_version", 0) != kTelemetrySchemaVersion) {
      throw Error(ErrorCode::ParseError, "unsupported schema_version " + h["schema_version"].dump());
    }
    log.header_.session_id = h.at("session_id").get<std::string>();
    log.header_.participant = h.value("participant", "");
    log.header_.seed = h.value("seed", std::uint64_t{0});
    log.header_.slots = h.value("slots", std::vector<std::string>{});
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const json j = parse_line(i);
      TelemetryEvent e;
      e.session_id = j.at("session").get<std::string>();
      e.level_index = j.at("level_index").get<int>();
      e.level_id = j.at("level").get<std::string>();
      e.tick = j.at("tick").get<int>();
      const auto kind = parse_event_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": unknown event kind");
      e.kind = *kind;
      e.payload = j.at("payload");
      const auto seq = j.at("seq").get<std::uint64_t>();
      log.append(std::move(e));
      if (log.events_.back().seq != seq) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": sequence gap");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return log;
}

TelemetryLog TelemetryLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open telemetry file " + path.string());
  return parse_ndjson(in);
}

const LevelFeatures& FeatureVector::level(const std::string& slot) const {
  static const LevelFeatures kUnplayed{};
  const auto it = levels.find(slot);
  return it == levels.end() ? kUnplayed : it->second;
}

json FeatureVector::to_json() const {
  json j;
  j["chat_count"] = chat_count;
  j["difficulty_offered"] = difficulty_offered;
  j["difficulty_accepted"] = difficulty_accepted;
  j["members_ever"] = members_ever;
  j["nonperformer_inclusions"] = nonperformer_inclusions;
  j["ai_count"] = ai_count;
  j["active"] = active;
  j["abandoned"] = abandoned;
  j["ai_earning_rank"] = json::object();
  for (const auto& [id, r] : ai_earning_rank) j["ai_earning_rank"][std::to_string(id)] = r;
  j["levels"] = json::object();
  for (const auto& [slot, l] : levels) {
    json lj{{"played", l.played},
            {"abandoned", l.abandoned},
            {"level_id", l.level_id},
            {"ticks", l.ticks},
            {"cells_moved", l.cells_moved},
            {"move_attempts", l.move_attempts},
            {"idle_ticks", l.idle_ticks},
            {"planning_latency", l.planning_latency},
            {"team", l.team},
            {"team_size", l.team_size},
            {"bubbles_collected", l.bubbles_collected},
            {"subject_points", l.subject_points},
            {"others_points", l.others_points},
            {"team_points", l.team_points},
            {"choke_ticks", l.choke_ticks},
            {"yield_ticks", l.yield_ticks},
            {"flow_share", l.flow_share},
            {"hidden_cells_visited", l.hidden_cells_visited},
            {"hidden_cells_total", l.hidden_cells_total},
            {"route_overlap", l.route_overlap},
            {"total_rate", l.total_rate}};
    j["levels"][slot] = lj;
  }
  return j;
}

namespace {

Cell cell_of(const json& j) { return j.get<Cell>(); }

// Cells whose potential flow ranks in the upper half of all positive-flow cells.
std::set<Cell> top_flow_half(const LevelSpec& spec) {
  LevelState state = create_level(spec);
  for (auto& r : state.regions) {
    r.revealed = true;
    r.revealed_tick = 0;
  }
  const FlowField field = flow_field(state);
  std::vector<Cell> cells = field.positive_cells();
  std::stable_sort(cells.begin(), cells.end(), [&](Cell a, Cell b) { return field.at(a) > field.at(b); });
  const std::size_t half = (cells.size() + 1) / 2;
  std::set<Cell> out;
  if (cells.empty()) return out;
  const double threshold = field.at(cells[half - 1]);
  for (Cell c : cells) {
    if (field.at(c) >= threshold) out.insert(c);
  }
  return out;
}

void fill_level(LevelFeatures& f, const LevelSpec& spec, const std::vector<const TelemetryEvent*>& events) {
  const TelemetryEvent* end = events.back();
  f.played = true;
  f.level_id = spec.level_id;
  f.ticks = end->payload.at("ticks").get<int>();
  f.abandoned = end->payload.value("abandoned", false);
  for (const auto& [slot, pts] : end->payload.at("gross").items()) {
    f.gross[static_cast<PlayerId>(std::stoul(slot))] = pts.get<Millipoints>();
  }
  f.team = end->payload.value("team", std::set<PlayerId>{});
  f.team_size = 1 + static_cast<int>(f.team.size());
  for (const auto& [id, pts] : f.gross) {
    if (id == kSubjectId) {
      f.subject_points = pts;
    } else {
      f.others_points += pts;
      if (f.team.contains(id)) f.team_points += pts;
    }
  }
  f.total_rate = std::accumulate(spec.emitters.begin(), spec.emitters.end(), 0.0,
                                 [](double acc, const EmitterSpec& e) { return acc + e.rate.to_double(); });

  std::map<int, Cell> moves_at;
  for (const TelemetryEvent* e : events) {
    const PlayerId player = e->payload.value("player", PlayerId{9999});
    if (player != kSubjectId) continue;
    if (e->kind == EventKind::Move) {
      moves_at[e->tick] = cell_of(e->payload.at("to"));
      ++f.cells_moved;
      ++f.move_attempts;
    } else if (e->kind == EventKind::Block) {
      ++f.move_attempts;
    } else if (e->kind == EventKind::Collect) {
      f.bubbles_collected += e->payload.at("count").get<int>();
    }
  }
  f.idle_ticks = f.ticks - f.cells_moved;
  f.planning_latency = moves_at.empty() ? f.ticks : moves_at.begin()->first;

  const std::set<Cell> choke(spec.choke_cells.begin(), spec.choke_cells.end());
  const std::set<Cell> yield(spec.yield_cells.begin(), spec.yield_cells.end());
  const std::set<Cell> top = top_flow_half(spec);
  const StaticMap map(spec);
  std::set<Cell> hidden_cells;
  for (const auto& r : spec.hidden_regions) {
    for (Cell c : r.cells) {
      if (!map.solid(c)) hidden_cells.insert(c);
    }
  }
  f.hidden_cells_total = static_cast<int>(hidden_cells.size());

  Cell pos = spec.spawn_points.at(kSubjectId);
  std::set<Cell> visited_hidden;
  std::vector<Cell> trajectory;
  int top_ticks = 0;
  for (int t = 0; t < f.ticks; ++t) {
    if (const auto it = moves_at.find(t); it != moves_at.end()) {
      pos = it->second;
      trajectory.push_back(pos);
    }
    if (choke.contains(pos)) ++f.choke_ticks;
    if (yield.contains(pos)) ++f.yield_ticks;
    if (top.contains(pos)) ++top_ticks;
    if (hidden_cells.contains(pos)) visited_hidden.insert(pos);
  }
  f.hidden_cells_visited = static_cast<int>(visited_hidden.size());
  f.flow_share = f.ticks > 0 ? static_cast<double>(top_ticks) / f.ticks : 0.0;
  if (!spec.optimal_route.empty()) {
    std::size_t prefix = 0;
    while (prefix < trajectory.size() && prefix < spec.optimal_route.size() &&
           trajectory[prefix] == spec.optimal_route[prefix]) {
      ++prefix;
    }
    f.route_overlap = static_cast<double>(prefix) / static_cast<double>(spec.optimal_route.size());
  }
}

}  // namespace

FeatureVector extract_features(const TelemetryLog& log, const LevelCatalog& catalog) {
  FeatureVector fv;
  std::map<int, std::vector<const TelemetryEvent*>> by_level;
  for (const auto& e : log.events()) by_level[e.level_index].push_back(&e);

  const std::set<PlayerId> ais = catalog.ai_players();
  fv.ai_count = static_cast<int>(ais.size());
  std::map<PlayerId, Millipoints> session_gross;
  for (PlayerId id : ais) session_gross[id] = 0;

  bool closed_by_abandon = false;
  int completed = 0;
  for (const auto& [index, events] : by_level) {
    if (index < 0 || index >= static_cast<int>(catalog.levels.size())) {
      throw Error(ErrorCode::IncompleteLog, "level index " + std::to_string(index) + " outside the catalog");
    }
    const std::string& slot = catalog.levels[static_cast<std::size_t>(index)].slot;
    for (const TelemetryEvent* e : events) {
      switch (e->kind) {
        case EventKind::Chat:
          if (e->payload.value("from", PlayerId{9999}) == kSubjectId) ++fv.chat_count;
          break;
        case EventKind::TeamSelect:
          for (const auto& m : e->payload.at("members")) fv.members_ever.insert(m.get<PlayerId>());
          break;
        case EventKind::DifficultyChoice:
          ++fv.difficulty_offered;
          if (e->payload.value("accepted", false)) ++fv.difficulty_accepted;
          break;
        case EventKind::Move:
        case EventKind::Block:
          if (e->payload.value("player", PlayerId{9999}) == kSubjectId) fv.active = true;
          break;
        default:
          break;
      }
    }
    const TelemetryEvent* last = events.back();
    if (last->kind != EventKind::LevelEnd) {
      throw Error(ErrorCode::IncompleteLog, "level " + slot + " has no LevelEnd");
    }
    const LevelSpec* spec = catalog.find_level(last->level_id);
    if (!spec) throw Error(ErrorCode::IncompleteLog, "unknown level id " + last->level_id);
    LevelFeatures lf;
    fill_level(lf, *spec, events);
    for (const auto& [id, pts] : lf.gross) {
      if (ais.contains(id)) session_gross[id] += pts;
    }
    if (lf.abandoned) closed_by_abandon = true;
    fv.levels[slot] = std::move(lf);
    ++completed;
  }
  fv.abandoned = closed_by_abandon;
  if (!closed_by_abandon && completed < static_cast<int>(catalog.levels.size())) {
    throw Error(ErrorCode::IncompleteLog, "only " + std::to_string(completed) + " of " +
                                              std::to_string(catalog.levels.size()) + " levels completed");
  }

  for (PlayerId m : fv.members_ever) {
    const auto it = catalog.roster.find(m);
    if (it != catalog.roster.end() && !it->second.human &&
        (it->second.policy == PolicyKind::Lazy || it->second.policy == PolicyKind::Irritator)) {
      ++fv.nonperformer_inclusions;
    }
  }

  // Average ranks, ascending by earnings.
  std::vector<std::pair<Millipoints, PlayerId>> order;
  for (const auto& [id, pts] : session_gross) order.emplace_back(pts, id);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && order[j].first == order[i].first) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) fv.ai_earning_rank[order[k].second] = rank;
    i = j;
  }
  return fv;
}

double feature_score(const ScenarioInstrument& ins, const FeatureVector& fv) {
  if (!fv.active) return 0.0;
  const LevelFeatures& lf = fv.level(ins.level_slot);
  const double cap = ins.cap;
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  double fraction = 0.0;
  const std::string& m = ins.feature_map;
  if (m == "chat") {
    fraction = std::min(1.0, ratio(fv.chat_count, ins.param("saturation", 5.0)));
  } else if (m == "difficulty") {
    fraction = ratio(fv.difficulty_accepted, fv.difficulty_offered);
  } else if (m == "nonperformer") {
    fraction = std::min(1.0, ratio(fv.nonperformer_inclusions, ins.param("saturation", 2.0)));
  } else if (m == "team_quality") {
    if (!fv.members_ever.empty() && fv.ai_count > 0) {
      double sum = 0.0;
      for (PlayerId id : fv.members_ever) {
        const auto it = fv.ai_earning_rank.find(id);
        sum += it == fv.ai_earning_rank.end() ? 0.0 : it->second;
      }
      fraction = sum / static_cast<double>(fv.members_ever.size()) / fv.ai_count;
    }
  } else if (!lf.played) {
    fraction = 0.0;
  } else if (m == "team_size") {
    fraction = ratio(lf.team_size - 1, ins.param("max_members", 5.0));
  } else if (m == "early_movement") {
    fraction = std::min(1.0, ratio(lf.cells_moved, ins.param("fraction", 0.8) * lf.ticks));
  } else if (m == "exploration") {
    fraction = ratio(lf.hidden_cells_visited, lf.hidden_cells_total);
  } else if (m == "yield_share") {
    fraction = ratio(lf.yield_ticks, lf.yield_ticks + lf.choke_ticks);
  } else if (m == "others_score") {
    fraction = std::min(1.0, ratio(static_cast<double>(lf.others_points) / kMillipointsPerPoint,
                                   ins.param("reference_max", 1.0)));
  } else if (m == "route_overlap") {
    fraction = lf.route_overlap;
  } else if (m == "flow_share") {
    fraction = lf.flow_share;
  } else if (m == "trap") {
    fraction = std::max(0.0, 1.0 - ratio(lf.bubbles_collected, ins.param("baseline", 1.0)));
  } else if (m == "aftermath") {
    const std::string base_slot = ins.params.value("baseline_slot", std::string("L1"));
    const LevelFeatures& base = fv.level(base_slot);
    if (base.played && base.total_rate > 0.0 && base.ticks > 0) {
      const double adjusted = static_cast<double>(base.subject_points) * (lf.total_rate * lf.ticks) /
                              (base.total_rate * base.ticks);
      if (adjusted > 0.0) fraction = std::max(0.0, 1.0 - static_cast<double>(lf.subject_points) / adjusted);
    }
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown feature_map " + m);
  }
  return cap * std::clamp(fraction, 0.0, 1.0);
}

std::vector<ScenarioScore> scenario_scores(const FeatureVector& fv, const std::vector<ScenarioInstrument>& instruments) {
  std::vector<ScenarioScore> out;
  out.reserve(instruments.size());
  for (const auto& ins : instruments) {
    const LevelFeatures& lf = fv.level(ins.level_slot);
    ScenarioScore s;
    s.instrument_id = ins.instrument_id;
    s.factor = ins.factor;
    s.player_score = feature_score(ins, fv);
    s.team_score = lf.played ? static_cast<double>(lf.team_points) / kMillipointsPerPoint : 0.0;
    s.total_score = s.player_score + s.team_score;
    s.team_size = lf.played ? lf.team_size : 1;
    s.weight = ins.weight;
    s.cap = ins.cap;
    out.push_back(s);
  }
  return out;
}

}  // namespace traitgrid
