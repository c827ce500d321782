#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/scenario.hpp"

namespace traitgrid {

inline constexpr int kTelemetrySchemaVersion = 1;
inline constexpr std::string_view kTelemetrySchema = "traitgrid.telemetry";

enum class EventKind : std::uint8_t {
  Move,
  Block,
  Collect,
  Reveal,
  TeamSelect,
  Chat,
  DifficultyChoice,
  Transfer,
  LevelEnd,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct TelemetryEvent {
  std::string session_id;
  std::uint64_t seq = 0;  // assigned by the log
  int level_index = 0;
  std::string level_id;
  int tick = 0;
  EventKind kind = EventKind::Move;
  nlohmann::json payload = nlohmann::json::object();
};

struct TelemetryHeader {
  std::string session_id;
  std::string participant;
  std::uint64_t seed = 0;
  std::vector<std::string> slots;
};

// Append-only, strictly ordered by (level_index, tick, seq).
class TelemetryLog {
 public:
  TelemetryLog() = default;
  explicit TelemetryLog(TelemetryHeader header) : header_(std::move(header)) {}

  // Throws OutOfOrder if the event would precede the tail or reopen a closed level.
  void append(TelemetryEvent event);

  const TelemetryHeader& header() const { return header_; }
  const std::vector<TelemetryEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  void write_ndjson(std::ostream& out) const;
  std::string to_ndjson() const;
  void save(const std::filesystem::path& path) const;

  // Throws ParseError (malformed JSON or schema) or OutOfOrder.
  static TelemetryLog parse_ndjson(std::istream& in);
  static TelemetryLog load(const std::filesystem::path& path);

 private:
  TelemetryHeader header_;
  std::vector<TelemetryEvent> events_;
  int closed_level_ = -1;
};

// record(log, event) -> log'
TelemetryLog record(TelemetryLog log, TelemetryEvent event);

std::string event_line(const TelemetryEvent& e);

struct LevelFeatures {
  bool played = false;
  bool abandoned = false;
  std::string level_id;
  int ticks = 0;
  int cells_moved = 0;
  int move_attempts = 0;
  int idle_ticks = 0;
  // Tick of the first subject move; equals ticks when the subject never moved.
  int planning_latency = 0;
  std::set<PlayerId> team;
  int team_size = 1;  // tau, includes the subject
  int bubbles_collected = 0;
  Millipoints subject_points = 0;
  Millipoints others_points = 0;
  Millipoints team_points = 0;  // gross points of the active team on this level
  int choke_ticks = 0;
  int yield_ticks = 0;
  double flow_share = 0.0;  // fraction of ticks spent in the top-flow half of cells
  int hidden_cells_visited = 0;
  int hidden_cells_total = 0;
  double route_overlap = 0.0;
  double total_rate = 0.0;  // sum of all emitter rates on the played level
  std::map<PlayerId, Millipoints> gross;
};

struct FeatureVector {
  std::map<std::string, LevelFeatures> levels;  // keyed by canonical slot
  int chat_count = 0;
  int difficulty_offered = 0;
  int difficulty_accepted = 0;
  std::set<PlayerId> members_ever;
  int nonperformer_inclusions = 0;
  // 1 = lowest session earner among AIs.
  std::map<PlayerId, double> ai_earning_rank;
  int ai_count = 0;
  bool active = false;  // the subject attempted at least one move
  bool abandoned = false;

  const LevelFeatures& level(const std::string& slot) const;
  nlohmann::json to_json() const;
};

// Deterministic aggregation. Throws IncompleteLog when a started level has no LevelEnd.
FeatureVector extract_features(const TelemetryLog& log, const LevelCatalog& catalog);

struct ScenarioScore {
  std::string instrument_id;
  Factor factor = Factor::Openness;
  double player_score = 0.0;  // S_P
  double team_score = 0.0;    // S_t
  double total_score = 0.0;   // S_T = S_P + S_t
  int team_size = 1;          // tau
  double weight = 1.0;        // lambda
  double cap = 100.0;
};

// S_P for a single instrument, in [0, cap].
double feature_score(const ScenarioInstrument& instrument, const FeatureVector& features);

std::vector<ScenarioScore> scenario_scores(const FeatureVector& features,
                                           const std::vector<ScenarioInstrument>& instruments);

}  // namespace traitgrid
