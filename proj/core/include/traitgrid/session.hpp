#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitgrid/economy.hpp"
#include "traitgrid/error.hpp"
#include "traitgrid/policies.hpp"
#include "traitgrid/scenario.hpp"
#include "traitgrid/scoring.hpp"
#include "traitgrid/telemetry.hpp"
#include "traitgrid/world.hpp"

namespace traitgrid {

struct SessionConfig {
  std::filesystem::path catalog_path;
  std::filesystem::path params_path;  // empty: catalog defaults
  std::filesystem::path population_path;  // empty: in-memory store
  int tick_rate = 5;
  // Session ticks between levels; the team picker and difficulty prompt are open meanwhile.
  int intermission_ticks = 10;
  std::uint64_t rng_seed = 0;
  std::string participant;
  // Lets a participant with a completed session play again.
  bool allow_repeat = false;
  int lazy_period = 3;
  int adaptive_refresh = 5;

  // Throws BadConfig.
  void validate() const;
};

// Reads a JSON config file; relative paths resolve against the file's directory. Throws BadConfig.
SessionConfig load_session_config(const std::filesystem::path& path);
SessionConfig session_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

enum class MessageKind : std::uint8_t {
  Join,
  Snapshot,
  MoveCmd,
  TeamSelect,
  ChatSend,
  ChatRecv,
  DifficultyPrompt,
  DifficultyChoice,
  LevelTransition,
  FinalReport,
  Error,
};

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(std::string_view text);
bool is_client_kind(MessageKind kind);

struct ProtocolMessage {
  MessageKind kind = MessageKind::Join;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const;
  std::string dump() const { return to_json().dump(); }
  // Throws ParseError.
  static ProtocolMessage from_json(const nlohmann::json& j);
  static ProtocolMessage parse(const std::string& text);

  friend bool operator==(const ProtocolMessage& a, const ProtocolMessage& b) {
    return a.kind == b.kind && a.seq == b.seq && a.payload == b.payload;
  }
};

// Client message helpers.
ProtocolMessage make_join(std::uint64_t seq, const std::string& participant = {});
ProtocolMessage make_move(std::uint64_t seq, std::optional<Direction> dir);
ProtocolMessage make_team_select(std::uint64_t seq, const std::set<PlayerId>& members);
ProtocolMessage make_chat(std::uint64_t seq, const std::string& text);
ProtocolMessage make_difficulty_choice(std::uint64_t seq, bool accepted);

enum class Phase : std::uint8_t { Intermission, Playing, Complete };
std::string_view to_string(Phase p);

// One inbound message and the number of session ticks that had elapsed when it arrived.
struct LoggedCommand {
  std::uint64_t at = 0;
  ProtocolMessage message;
};

struct CommandLog {
  std::string session_id;
  std::string participant;
  std::uint64_t seed = 0;
  int intermission_ticks = 10;
  int lazy_period = 3;
  int adaptive_refresh = 5;
  std::vector<LoggedCommand> commands;
  std::optional<std::uint64_t> abandoned_at;

  std::string to_ndjson() const;
  void save(const std::filesystem::path& path) const;
  // Throws ParseError.
  static CommandLog parse_ndjson(const std::string& text);
  static CommandLog load(const std::filesystem::path& path);
};

// The authoritative state for one subject's pass through the catalog. Not
// thread-safe; the gateway gives each session its own strand.
class Session {
 public:
  Session(std::string session_id, std::shared_ptr<const LevelCatalog> catalog, SessionConfig cfg);

  // Processes one client frame. Protocol violations come back as an Error message.
  std::vector<ProtocolMessage> handle_message(const ProtocolMessage& msg);
  // One session tick: a level step while playing, a countdown tick otherwise.
  std::vector<ProtocolMessage> advance();
  // Messages produced outside handle_message/advance (the opening transition).
  std::vector<ProtocolMessage> drain();

  // Ends the session early; the current level is closed with the abandoned flag.
  std::vector<ProtocolMessage> abandon();

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  Phase phase() const { return phase_; }
  bool complete() const { return phase_ == Phase::Complete; }
  bool abandoned() const { return abandoned_; }
  std::size_t level_index() const { return level_index_; }
  std::uint64_t session_tick() const { return session_tick_; }
  // Present while a level is being played, and after it ends until the next starts.
  const std::optional<LevelState>& level_state() const { return state_; }
  const TeamConfig& team() const { return team_; }
  const TeamLedger& ledger() const { return ledger_; }
  const TelemetryLog& telemetry() const { return log_; }
  const CommandLog& command_log() const { return commands_; }
  const LevelCatalog& catalog() const { return *catalog_; }
  std::optional<DifficultyPrompt> pending_prompt() const;
  // Hash of the last level state reached.
  std::uint64_t final_hash() const { return final_hash_; }
  // Session-long balances across finished levels plus the current one.
  std::map<PlayerId, Millipoints> session_balances() const;

  ProtocolMessage snapshot();
  // Stamps a server message with the next sequence number.
  ProtocolMessage make_message(MessageKind kind, nlohmann::json payload);

 private:
  std::string id_;
  std::shared_ptr<const LevelCatalog> catalog_;
  SessionConfig cfg_;
  Phase phase_ = Phase::Intermission;
  std::size_t level_index_ = 0;
  std::uint64_t session_tick_ = 0;
  int intermission_elapsed_ = 0;
  std::optional<LevelState> state_;
  TeamConfig team_;
  TeamConfig level_team_;  // team_ restricted to players present on the level
  TeamLedger ledger_;
  std::map<PlayerId, Millipoints> banked_;
  DifficultyOffers offers_;
  std::optional<std::string> prompt_slot_;
  std::optional<Direction> pending_move_;
  bool move_pending_ = false;
  std::uint64_t last_client_seq_ = 0;
  bool seen_client_seq_ = false;
  std::uint64_t server_seq_ = 0;
  std::uint64_t snapshot_count_ = 0;
  Rng chat_rng_;
  struct PendingReply {
    std::uint64_t due = 0;
    PlayerId from = 0;
    std::string text;
  };
  std::vector<PendingReply> replies_;
  TelemetryLog log_;
  CommandLog commands_;
  std::uint64_t final_hash_ = 0;
  bool abandoned_ = false;
  std::vector<ProtocolMessage> outbox_;

  void emit(MessageKind kind, nlohmann::json payload);
  void log_event(EventKind kind, int tick, nlohmann::json payload);
  void error(ErrorCode code, const std::string& message);
  std::vector<ProtocolMessage> flush();
  const std::string& current_slot() const;
  std::string current_level_id() const;
  int current_tick() const;
  void enter_intermission();
  void start_level();
  void finish_level(bool abandoned);
  void play_tick();
  void deliver_replies();
  void on_move(const ProtocolMessage& msg);
  void on_team_select(const ProtocolMessage& msg);
  void on_chat(const ProtocolMessage& msg);
  void on_difficulty(const ProtocolMessage& msg);
};

// Display colour of each roster slot.
std::string_view player_colour(PlayerId id);

// Phrase table for canned chat replies.
std::string_view canned_reply(const PlayerKind& kind, std::uint64_t pick);

struct ReplayResult {
  std::uint64_t final_hash = 0;
  std::string telemetry;  // NDJSON
  bool complete = false;
};

// Re-executes a session from its command log with the same catalog and seed.
ReplayResult replay(const CommandLog& log, std::shared_ptr<const LevelCatalog> catalog);

// Owns every live session and the shared population store. All methods are thread-safe.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const LevelCatalog> catalog, ScoringParams params, PopulationStore store,
                 SessionConfig defaults);

  // Throws DuplicateParticipant, BadConfig.
  std::string create_session(const std::string& participant, std::optional<std::uint64_t> seed = std::nullopt,
                             bool allow_repeat = false);
  // Throws UnknownSession. The caller must serialize access to the returned session.
  std::shared_ptr<Session> session(const std::string& id) const;
  // Throws UnknownSession, IncompleteSession (unless abandon is set).
  FactorReport finalize(const std::string& id, bool abandon = false);
  std::optional<FactorReport> report_for(const std::string& id) const;
  PopulationStore population() const;
  const LevelCatalog& catalog() const { return *catalog_; }
  const ScoringParams& params() const { return params_; }
  const SessionConfig& defaults() const { return defaults_; }

 private:
  std::shared_ptr<const LevelCatalog> catalog_;
  ScoringParams params_;
  SessionConfig defaults_;
  mutable std::mutex mu_;
  PopulationStore store_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, FactorReport> reports_;
  std::set<std::string> completed_participants_;
  std::uint64_t counter_ = 0;
  std::uint64_t id_salt_;
};

}  // namespace traitgrid
