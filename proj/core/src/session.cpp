#include "traitgrid/session.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "traitgrid/error.hpp"

namespace traitgrid {

using nlohmann::json;

void SessionConfig::validate() const {
  if (tick_rate < 1 || tick_rate > 30) {
    throw Error(ErrorCode::BadConfig, "tick_rate must lie in [1, 30], got " + std::to_string(tick_rate));
  }
  if (intermission_ticks < 1) throw Error(ErrorCode::BadConfig, "intermission_ticks must be >= 1");
  traitgrid::validate(PolicyConfig{PolicyKind::Lazy, lazy_period, adaptive_refresh});
}

SessionConfig session_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  SessionConfig cfg;
  auto path_of = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  try {
    cfg.catalog_path = path_of("catalog");
    cfg.params_path = path_of("params");
    cfg.population_path = path_of("population");
    cfg.tick_rate = j.value("tick_rate", cfg.tick_rate);
    cfg.intermission_ticks = j.value("intermission_ticks", cfg.intermission_ticks);
    cfg.rng_seed = j.value("seed", cfg.rng_seed);
    cfg.participant = j.value("participant", cfg.participant);
    cfg.allow_repeat = j.value("allow_repeat", cfg.allow_repeat);
    cfg.lazy_period = j.value("lazy_period", cfg.lazy_period);
    cfg.adaptive_refresh = j.value("adaptive_refresh", cfg.adaptive_refresh);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadConfig) throw;
    throw Error(ErrorCode::BadConfig, e.what());
  }
  return cfg;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return session_config_from_json(j, path.parent_path());
}

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 11> kMessageNames{{
    {MessageKind::Join, "Join"},
    {MessageKind::Snapshot, "Snapshot"},
    {MessageKind::MoveCmd, "MoveCmd"},
    {MessageKind::TeamSelect, "TeamSelect"},
    {MessageKind::ChatSend, "ChatSend"},
    {MessageKind::ChatRecv, "ChatRecv"},
    {MessageKind::DifficultyPrompt, "DifficultyPrompt"},
    {MessageKind::DifficultyChoice, "DifficultyChoice"},
    {MessageKind::LevelTransition, "LevelTransition"},
    {MessageKind::FinalReport, "FinalReport"},
    {MessageKind::Error, "Error"},
}};

}  // namespace

std::string_view to_string(MessageKind kind) {
  for (const auto& [k, name] : kMessageNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view text) {
  for (const auto& [k, name] : kMessageNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

bool is_client_kind(MessageKind kind) {
  switch (kind) {
    case MessageKind::Join:
    case MessageKind::MoveCmd:
    case MessageKind::TeamSelect:
    case MessageKind::ChatSend:
    case MessageKind::DifficultyChoice:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Intermission:
      return "intermission";
    case Phase::Playing:
      return "playing";
    case Phase::Complete:
      return "complete";
  }
  return "?";
}

json ProtocolMessage::to_json() const { return json{{"kind", to_string(kind)}, {"seq", seq}, {"payload", payload}}; }

ProtocolMessage ProtocolMessage::from_json(const json& j) {
  try {
    ProtocolMessage m;
    const auto kind = parse_message_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::ParseError, "unknown message kind " + j.at("kind").dump());
    m.kind = *kind;
    m.seq = j.at("seq").get<std::uint64_t>();
    m.payload = j.value("payload", json::object());
    if (!m.payload.is_object()) throw Error(ErrorCode::ParseError, "payload must be an object");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("message: ") + e.what());
  }
}

ProtocolMessage ProtocolMessage::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return from_json(j);
}

ProtocolMessage make_join(std::uint64_t seq, const std::string& participant) {
  return {MessageKind::Join, seq, json{{"participant", participant}}};
}

ProtocolMessage make_move(std::uint64_t seq, std::optional<Direction> dir) {
  return {MessageKind::MoveCmd, seq, json{{"dir", dir ? std::string(to_string(*dir)) : std::string("stay")}}};
}

ProtocolMessage make_team_select(std::uint64_t seq, const std::set<PlayerId>& members) {
  return {MessageKind::TeamSelect, seq, json{{"members", members}}};
}

ProtocolMessage make_chat(std::uint64_t seq, const std::string& text) {
  return {MessageKind::ChatSend, seq, json{{"text", text}}};
}

ProtocolMessage make_difficulty_choice(std::uint64_t seq, bool accepted) {
  return {MessageKind::DifficultyChoice, seq, json{{"accepted", accepted}}};
}

std::string_view player_colour(PlayerId id) {
  static constexpr std::array<std::string_view, 6> kColours{"blue", "red", "green", "purple", "black", "orange"};
  return id < kColours.size() ? kColours[id] : "grey";
}

std::string_view canned_reply(const PlayerKind& kind, std::uint64_t pick) {
  static constexpr std::array<std::string_view, 3> kHuman{"ok", "sure", "hi"};
  static constexpr std::array<std::string_view, 3> kLazy{"maybe later", "in a bit", "sounds like work"};
  static constexpr std::array<std::string_view, 3> kGreedy{"busy collecting", "bubbles first", "on it"};
  static constexpr std::array<std::string_view, 3> kImitator{"same here", "right behind you", "what you said"};
  static constexpr std::array<std::string_view, 3> kAdaptive{"watching the flow", "noted", "heading upstream"};
  static constexpr std::array<std::string_view, 3> kIrritator{"move over", "not now", "whatever"};
  const auto* table = &kHuman;
  if (!kind.human) {
    switch (kind.policy) {
      case PolicyKind::Lazy:
        table = &kLazy;
        break;
      case PolicyKind::Greedy:
        table = &kGreedy;
        break;
      case PolicyKind::Imitator:
        table = &kImitator;
        break;
      case PolicyKind::Adaptive:
        table = &kAdaptive;
        break;
      case PolicyKind::Irritator:
        table = &kIrritator;
        break;
    }
  }
  return (*table)[pick % table->size()];
}

std::string CommandLog::to_ndjson() const {
  std::ostringstream out;
  json header{{"record", "commands"},
              {"session_id", session_id},
              {"participant", participant},
              {"seed", seed},
              {"intermission_ticks", intermission_ticks},
              {"lazy_period", lazy_period},
              {"adaptive_refresh", adaptive_refresh}};
  out << header.dump() << '\n';
  for (const auto& c : commands) out << json{{"at", c.at}, {"message", c.message.to_json()}}.dump() << '\n';
  if (abandoned_at) out << json{{"record", "abandon"}, {"at", *abandoned_at}}.dump() << '\n';
  return out.str();
}

void CommandLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write command log " + path.string());
  out << to_ndjson();
}

CommandLog CommandLog::parse_ndjson(const std::string& text) {
  CommandLog log;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  int n = 0;
  try {
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!header) {
        if (j.value("record", "") != "commands") throw Error(ErrorCode::ParseError, "missing command log header");
        log.session_id = j.at("session_id").get<std::string>();
        log.participant = j.value("participant", "");
        log.seed = j.value("seed", std::uint64_t{0});
        log.intermission_ticks = j.value("intermission_ticks", 10);
        log.lazy_period = j.value("lazy_period", 3);
        log.adaptive_refresh = j.value("adaptive_refresh", 5);
        header = true;
      } else if (j.value("record", "") == "abandon") {
        log.abandoned_at = j.at("at").get<std::uint64_t>();
      } else {
        log.commands.push_back({j.at("at").get<std::uint64_t>(), ProtocolMessage::from_json(j.at("message"))});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "command log line " + std::to_string(n) + ": " + e.what());
  }
  if (!header) throw Error(ErrorCode::ParseError, "empty command log");
  return log;
}

CommandLog CommandLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open command log " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ndjson(content);
}

Session::Session(std::string session_id, std::shared_ptr<const LevelCatalog> catalog, SessionConfig cfg)
    : id_(std::move(session_id)), catalog_(std::move(catalog)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (catalog_->levels.empty()) throw Error(ErrorCode::MissingCanonicalLevel, "catalog has no levels");
  chat_rng_ = Rng(mix_seed(cfg_.rng_seed, 0x43484154));
  TelemetryHeader header{id_, cfg_.participant, cfg_.rng_seed, {}};
  for (const auto& e : catalog_->levels) header.slots.push_back(e.slot);
  log_ = TelemetryLog(header);
  commands_.session_id = id_;
  commands_.participant = cfg_.participant;
  commands_.seed = cfg_.rng_seed;
  commands_.intermission_ticks = cfg_.intermission_ticks;
  commands_.lazy_period = cfg_.lazy_period;
  commands_.adaptive_refresh = cfg_.adaptive_refresh;
  for (PlayerId id : catalog_->ai_players()) banked_[id] = 0;
  banked_[kSubjectId] = 0;
  enter_intermission();
}

void Session::emit(MessageKind kind, json payload) {
  outbox_.push_back({kind, server_seq_++, std::move(payload)});
}

ProtocolMessage Session::make_message(MessageKind kind, json payload) {
  return {kind, server_seq_++, std::move(payload)};
}

void Session::log_event(EventKind kind, int tick, json payload) {
  TelemetryEvent e;
  e.session_id = id_;
  e.level_index = static_cast<int>(level_index_);
  e.level_id = current_level_id();
  e.tick = tick;
  e.kind = kind;
  e.payload = std::move(payload);
  log_.append(std::move(e));
}

void Session::error(ErrorCode code, const std::string& message) {
  emit(MessageKind::Error, json{{"code", to_string(code)}, {"message", message}});
}

std::vector<ProtocolMessage> Session::flush() {
  std::vector<ProtocolMessage> out;
  out.swap(outbox_);
  return out;
}

std::vector<ProtocolMessage> Session::drain() { return flush(); }

const std::string& Session::current_slot() const {
  return catalog_->levels[std::min(level_index_, catalog_->levels.size() - 1)].slot;
}

std::string Session::current_level_id() const {
  if (phase_ == Phase::Playing && state_) return state_->spec->level_id;
  return catalog_->levels[std::min(level_index_, catalog_->levels.size() - 1)].base->level_id;
}

int Session::current_tick() const { return phase_ == Phase::Playing && state_ ? state_->tick : 0; }

std::optional<DifficultyPrompt> Session::pending_prompt() const {
  if (!prompt_slot_) return std::nullopt;
  const CatalogEntry& e = catalog_->entry(*prompt_slot_);
  return DifficultyPrompt{e.slot, e.base->level_id, e.variant->level_id};
}

std::map<PlayerId, Millipoints> Session::session_balances() const {
  std::map<PlayerId, Millipoints> out = banked_;
  if (phase_ == Phase::Playing) {
    for (const auto& [id, b] : ledger_.balances) out[id] += b;
  }
  return out;
}

void Session::enter_intermission() {
  phase_ = Phase::Intermission;
  intermission_elapsed_ = 0;
  const CatalogEntry& e = catalog_->levels[level_index_];
  emit(MessageKind::LevelTransition, json{{"phase", "intermission"},
                                          {"level_index", level_index_},
                                          {"slot", e.slot},
                                          {"level_id", e.base->level_id},
                                          {"ticks", cfg_.intermission_ticks}});
  if (e.variant) {
    if (const auto prompt = offers_.offer(*catalog_, e.slot)) {
      prompt_slot_ = e.slot;
      emit(MessageKind::DifficultyPrompt, json{{"slot", prompt->slot},
                                               {"base_level_id", prompt->base_level_id},
                                               {"variant_level_id", prompt->variant_level_id},
                                               {"timeout_ticks", cfg_.intermission_ticks}});
    }
  }
}

void Session::start_level() {
  const CatalogEntry& e = catalog_->levels[level_index_];
  if (prompt_slot_) {
    offers_.record_choice(*prompt_slot_, false);
    log_event(EventKind::DifficultyChoice, 0,
              json{{"slot", e.slot}, {"variant", e.variant->level_id}, {"accepted", false}, {"timeout", true}});
    prompt_slot_.reset();
  }
  const bool harder = e.variant && offers_.choice(e.slot).value_or(false);
  LevelState s = create_level(harder ? e.variant : e.base);
  s.rng = Rng(mix_seed(cfg_.rng_seed, mix_seed(s.spec->rng_seed, level_index_)));
  level_team_ = TeamConfig{};
  for (PlayerId m : team_.subject_team) {
    if (s.find_player(m)) level_team_.subject_team.insert(m);
  }
  ledger_ = TeamLedger{};
  for (const auto& p : s.players) {
    ledger_.gross[p.player_id] = 0;
    ledger_.balances[p.player_id] = 0;
  }
  state_ = std::move(s);
  phase_ = Phase::Playing;
  emit(MessageKind::LevelTransition, json{{"phase", "playing"},
                                          {"level_index", level_index_},
                                          {"slot", e.slot},
                                          {"level_id", state_->spec->level_id},
                                          {"level", to_json(*state_->spec)},
                                          {"team", level_team_.subject_team}});
}

void Session::finish_level(bool abandoned) {
  json gross = json::object();
  json balances = json::object();
  for (const auto& [id, g] : ledger_.gross) gross[std::to_string(id)] = g;
  for (const auto& [id, b] : ledger_.balances) balances[std::to_string(id)] = b;
  const int ticks = state_ ? state_->tick : 0;
  final_hash_ = state_ ? snapshot_hash(*state_) : 0;
  log_event(EventKind::LevelEnd, ticks,
            json{{"ticks", ticks},
                 {"gross", gross},
                 {"balances", balances},
                 {"team", level_team_.subject_team},
                 {"hash", hash_hex(final_hash_)},
                 {"abandoned", abandoned}});
  for (const auto& [id, b] : ledger_.balances) banked_[id] += b;
  emit(MessageKind::LevelTransition, json{{"phase", "level_end"},
                                          {"level_index", level_index_},
                                          {"slot", current_slot()},
                                          {"level_id", current_level_id()},
                                          {"gross", gross},
                                          {"balances", balances},
                                          {"abandoned", abandoned}});
  ledger_ = TeamLedger{};
  ++level_index_;
  if (abandoned || level_index_ >= catalog_->levels.size()) {
    phase_ = Phase::Complete;
    emit(MessageKind::LevelTransition, json{{"phase", "complete"}, {"abandoned", abandoned}});
  } else {
    enter_intermission();
  }
}

void Session::play_tick() {
  LevelState& s = *state_;
  const int t = s.tick;
  std::vector<MoveCommand> commands;
  commands.reserve(s.players.size());
  for (const auto& p : s.players) {
    if (p.kind.human) {
      commands.push_back(move_pending_ ? MoveCommand{p.player_id, pending_move_} : MoveCommand::Stay(p.player_id));
    } else {
      const PolicyConfig policy{p.kind.policy, cfg_.lazy_period, cfg_.adaptive_refresh};
      commands.push_back(decide(policy, Observation{s, kSubjectId, p.player_id}));
    }
  }
  move_pending_ = false;
  pending_move_.reset();

  StepResult r = step(std::move(s), commands);
  state_ = std::move(r.state);
  std::map<PlayerId, Millipoints> earnings;
  for (const auto& ev : r.events) {
    if (const auto* m = std::get_if<MoveEvent>(&ev); m && m->player == kSubjectId) {
      log_event(EventKind::Move, t,
                json{{"player", m->player}, {"from", m->from}, {"to", m->to}, {"dir", to_string(m->direction)}});
    } else if (const auto* b = std::get_if<BlockEvent>(&ev); b && b->player == kSubjectId) {
      log_event(EventKind::Block, t,
                json{{"player", b->player}, {"at", b->at}, {"dir", to_string(b->direction)}, {"reason", to_string(b->reason)}});
    } else if (const auto* c = std::get_if<CollectEvent>(&ev)) {
      earnings[c->player] += c->points;
      log_event(EventKind::Collect, t,
                json{{"player", c->player}, {"cell", c->cell}, {"count", c->count}, {"points", c->points}});
    } else if (const auto* rv = std::get_if<RevealEvent>(&ev)) {
      log_event(EventKind::Reveal, t, json{{"region", rv->region_id}, {"player", rv->player}});
    }
  }
  const std::size_t before = ledger_.transfers.size();
  ledger_ = settle(earnings, level_team_, std::move(ledger_), t);
  for (std::size_t i = before; i < ledger_.transfers.size(); ++i) {
    const Transfer& tr = ledger_.transfers[i];
    log_event(EventKind::Transfer, t, json{{"from", tr.from}, {"to", tr.to}, {"amount", tr.amount}});
  }
}

void Session::deliver_replies() {
  std::vector<PendingReply> later;
  for (auto& r : replies_) {
    if (r.due > session_tick_) {
      later.push_back(std::move(r));
      continue;
    }
    log_event(EventKind::Chat, current_tick(), json{{"from", r.from}, {"text", r.text}, {"direction", "received"}});
    emit(MessageKind::ChatRecv,
         json{{"from", r.from}, {"colour", player_colour(r.from)}, {"text", r.text}, {"session_tick", session_tick_}});
  }
  replies_ = std::move(later);
}

std::vector<ProtocolMessage> Session::advance() {
  if (phase_ == Phase::Complete) return flush();
  ++session_tick_;
  if (phase_ == Phase::Intermission) {
    ++intermission_elapsed_;
    deliver_replies();
    if (intermission_elapsed_ >= cfg_.intermission_ticks) start_level();
    outbox_.push_back(snapshot());
  } else {
    play_tick();
    deliver_replies();
    outbox_.push_back(snapshot());
    if (state_->finished()) finish_level(false);
  }
  return flush();
}

std::vector<ProtocolMessage> Session::abandon() {
  if (phase_ == Phase::Complete) return flush();
  commands_.abandoned_at = session_tick_;
  abandoned_ = true;
  if (phase_ == Phase::Intermission) {
    // Close the level that was about to start; it contributes nothing.
    prompt_slot_.reset();
    state_.reset();
    ledger_ = TeamLedger{};
    level_team_ = TeamConfig{};
  }
  finish_level(true);
  return flush();
}

void Session::on_move(const ProtocolMessage& msg) {
  if (phase_ != Phase::Playing) return error(ErrorCode::IllegalState, "moves are only accepted while a level is running");
  const std::string dir = msg.payload.value("dir", std::string("stay"));
  if (dir == "stay" || dir.empty()) {
    pending_move_.reset();
  } else {
    const auto d = parse_direction(dir);
    if (!d) return error(ErrorCode::ParseError, "unknown direction '" + dir + "'");
    pending_move_ = *d;
  }
  move_pending_ = true;
}

void Session::on_team_select(const ProtocolMessage& msg) {
  if (phase_ != Phase::Intermission) {
    return error(ErrorCode::IllegalState, "teams can only be chosen between levels");
  }
  std::set<PlayerId> members;
  try {
    members = msg.payload.at("members").get<std::set<PlayerId>>();
  } catch (const json::exception&) {
    return error(ErrorCode::ParseError, "TeamSelect needs an integer members array");
  }
  try {
    team_ = select_team(team_, members, catalog_->ai_players(), false);
  } catch (const Error& e) {
    return error(e.code(), e.what());
  }
  log_event(EventKind::TeamSelect, 0, json{{"members", members}});
  outbox_.push_back(snapshot());
}

void Session::on_chat(const ProtocolMessage& msg) {
  if (phase_ == Phase::Complete) return error(ErrorCode::IllegalState, "session is complete");
  const std::string text = msg.payload.value("text", std::string());
  log_event(EventKind::Chat, current_tick(), json{{"from", kSubjectId}, {"text", text}, {"direction", "sent"}});
  std::vector<PlayerId> pool(team_.subject_team.begin(), team_.subject_team.end());
  if (pool.empty()) {
    const auto ais = catalog_->ai_players();
    pool.assign(ais.begin(), ais.end());
  }
  if (pool.empty()) return;
  const PlayerId from = pool[static_cast<std::size_t>(chat_rng_.uniform(0, static_cast<int>(pool.size()) - 1))];
  const auto delay = static_cast<std::uint64_t>(chat_rng_.uniform(1, 2));
  replies_.push_back({session_tick_ + delay, from, std::string(canned_reply(catalog_->roster.at(from), chat_rng_.next()))});
}

void Session::on_difficulty(const ProtocolMessage& msg) {
  if (phase_ != Phase::Intermission || !prompt_slot_) {
    return error(ErrorCode::IllegalState, "no difficulty prompt is open");
  }
  const bool accepted = msg.payload.value("accepted", false);
  const CatalogEntry& e = catalog_->entry(*prompt_slot_);
  offers_.record_choice(e.slot, accepted);
  log_event(EventKind::DifficultyChoice, 0,
            json{{"slot", e.slot}, {"variant", e.variant->level_id}, {"accepted", accepted}, {"timeout", false}});
  prompt_slot_.reset();
}

std::vector<ProtocolMessage> Session::handle_message(const ProtocolMessage& msg) {
  commands_.commands.push_back({session_tick_, msg});
  if (seen_client_seq_ && msg.seq <= last_client_seq_) {
    error(ErrorCode::OutOfSeq, "seq " + std::to_string(msg.seq) + " is not after " + std::to_string(last_client_seq_));
    return flush();
  }
  seen_client_seq_ = true;
  last_client_seq_ = msg.seq;
  if (!is_client_kind(msg.kind)) {
    error(ErrorCode::IllegalState, std::string(to_string(msg.kind)) + " is a server message");
    return flush();
  }
  switch (msg.kind) {
    case MessageKind::Join:
      outbox_.push_back(snapshot());
      if (const auto p = pending_prompt()) {
        emit(MessageKind::DifficultyPrompt, json{{"slot", p->slot},
                                                 {"base_level_id", p->base_level_id},
                                                 {"variant_level_id", p->variant_level_id},
                                                 {"timeout_ticks", cfg_.intermission_ticks - intermission_elapsed_}});
      }
      break;
    case MessageKind::MoveCmd:
      on_move(msg);
      break;
    case MessageKind::TeamSelect:
      on_team_select(msg);
      break;
    case MessageKind::ChatSend:
      on_chat(msg);
      break;
    case MessageKind::DifficultyChoice:
      on_difficulty(msg);
      break;
    default:
      break;
  }
  return flush();
}

ProtocolMessage Session::snapshot() {
  json players = json::array();
  const auto totals = session_balances();
  for (const auto& [id, kind] : catalog_->roster) {
    json p{{"id", id},
           {"kind", to_string(kind)},
           {"colour", player_colour(id)},
           {"session_points", totals.contains(id) ? totals.at(id) : 0},
           {"on_team", team_.subject_team.contains(id)}};
    if (state_) {
      if (const PlayerState* ps = state_->find_player(id)) {
        p["cell"] = ps->position;
        p["level_points"] = phase_ == Phase::Playing ? ledger_.balance(id) : 0;
      }
    }
    players.push_back(std::move(p));
  }
  json j{{"snapshot", snapshot_count_++},
         {"session_tick", session_tick_},
         {"phase", to_string(phase_)},
         {"level_index", level_index_},
         {"slot", current_slot()},
         {"level_id", current_level_id()},
         {"team", team_.subject_team},
         {"players", players}};
  if (phase_ == Phase::Intermission) j["intermission_remaining"] = cfg_.intermission_ticks - intermission_elapsed_;
  if (state_) {
    const LevelState& s = *state_;
    json bubbles = json::array();
    for (const auto& b : s.bubbles) bubbles.push_back(b.position);
    json emitters = json::array();
    for (std::size_t i = 0; i < s.spec->emitters.size(); ++i) {
      const auto& e = s.spec->emitters[i];
      emitters.push_back({{"cell", e.position}, {"direction", to_string(e.direction)}, {"active", s.emitter_active(i)}});
    }
    json regions = json::array();
    for (std::size_t i = 0; i < s.spec->hidden_regions.size(); ++i) {
      regions.push_back({{"id", s.spec->hidden_regions[i].region_id},
                         {"revealed", s.regions[i].revealed},
                         {"cells", s.spec->hidden_regions[i].cells}});
    }
    j["board"] = {{"level_id", s.spec->level_id},
                  {"tick", s.tick},
                  {"tick_limit", s.spec->tick_limit},
                  {"width", s.spec->width},
                  {"height", s.spec->height},
                  {"walls", s.spec->walls},
                  {"emitters", emitters},
                  {"hidden_regions", regions},
                  {"bubbles", bubbles},
                  {"hash", hash_hex(snapshot_hash(s))}};
  }
  return {MessageKind::Snapshot, server_seq_++, std::move(j)};
}

ReplayResult replay(const CommandLog& log, std::shared_ptr<const LevelCatalog> catalog) {
  SessionConfig cfg;
  cfg.rng_seed = log.seed;
  cfg.participant = log.participant;
  cfg.intermission_ticks = log.intermission_ticks;
  cfg.lazy_period = log.lazy_period;
  cfg.adaptive_refresh = log.adaptive_refresh;
  Session s(log.session_id, std::move(catalog), cfg);
  s.drain();
  for (const auto& c : log.commands) {
    while (s.session_tick() < c.at && !s.complete()) s.advance();
    s.handle_message(c.message);
  }
  if (log.abandoned_at) {
    while (s.session_tick() < *log.abandoned_at && !s.complete()) s.advance();
    s.abandon();
  } else {
    while (!s.complete()) s.advance();
  }
  return {s.final_hash(), s.telemetry().to_ndjson(), s.complete()};
}

SessionManager::SessionManager(std::shared_ptr<const LevelCatalog> catalog, ScoringParams params,
                               PopulationStore store, SessionConfig defaults)
    : catalog_(std::move(catalog)),
      params_(std::move(params)),
      defaults_(std::move(defaults)),
      store_(std::move(store)),
      id_salt_(std::random_device{}()) {
  defaults_.validate();
  id_salt_ = mix_seed(id_salt_, static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
}

std::string SessionManager::create_session(const std::string& participant, std::optional<std::uint64_t> seed,
                                           bool allow_repeat) {
  std::lock_guard lock(mu_);
  const bool repeat_ok = allow_repeat || defaults_.allow_repeat;
  if (!repeat_ok && !participant.empty() &&
      (completed_participants_.contains(participant) || store_.has_participant(participant))) {
    throw Error(ErrorCode::DuplicateParticipant, "participant '" + participant + "' has already played");
  }
  SessionConfig cfg = defaults_;
  cfg.participant = participant;
  if (seed) cfg.rng_seed = *seed;
  std::string id = "s-" + hash_hex(mix_seed(id_salt_, ++counter_)).substr(0, 12);
  sessions_[id] = std::make_shared<Session>(id, catalog_, cfg);
  return id;
}

std::shared_ptr<Session> SessionManager::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  return it->second;
}

FactorReport SessionManager::finalize(const std::string& id, bool abandon) {
  const std::shared_ptr<Session> s = session(id);
  {
    std::lock_guard lock(mu_);
    if (const auto it = reports_.find(id); it != reports_.end()) return it->second;
  }
  if (!s->complete()) {
    if (!abandon) throw Error(ErrorCode::IncompleteSession, "session " + id + " has not finished every level");
    s->abandon();
  }
  std::lock_guard lock(mu_);
  FactorReport rep = report(s->telemetry(), *catalog_, params_, store_);
  reports_[id] = rep;
  if (!s->config().participant.empty()) completed_participants_.insert(s->config().participant);
  return rep;
}

std::optional<FactorReport> SessionManager::report_for(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = reports_.find(id);
  if (it == reports_.end()) return std::nullopt;
  return it->second;
}

PopulationStore SessionManager::population() const {
  std::lock_guard lock(mu_);
  return store_.detached();
}

}  // namespace traitgrid
