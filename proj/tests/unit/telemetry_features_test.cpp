#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "traitgrid/error.hpp"
#include "traitgrid/telemetry.hpp"

using namespace traitgrid;
using nlohmann::json;

namespace {

// Writes a synthetic session one level at a time.
class LogBuilder {
 public:
  LogBuilder() : log_(TelemetryHeader{"s-test", "p-test", 1, {"L1", "L2", "L3", "L4", "L5", "L6"}}) {}

  LogBuilder& at(int level_index, std::string level_id) {
    index_ = level_index;
    level_ = std::move(level_id);
    return *this;
  }
  LogBuilder& event(int tick, EventKind kind, json payload) {
    log_.append(TelemetryEvent{"", 0, index_, level_, tick, kind, std::move(payload)});
    return *this;
  }
  LogBuilder& move(int tick, Cell to, PlayerId p = kSubjectId) {
    return event(tick, EventKind::Move, {{"player", p}, {"to", to}});
  }
  LogBuilder& end(int ticks, std::map<PlayerId, Millipoints> gross = {{0, 0}}, std::set<PlayerId> team = {},
                  bool abandoned = false) {
    json g = json::object();
    for (const auto& [id, pts] : gross) g[std::to_string(id)] = pts;
    json payload{{"ticks", ticks}, {"gross", g}, {"team", team}};
    if (abandoned) payload["abandoned"] = true;
    return event(ticks, EventKind::LevelEnd, payload);
  }
  // Closes every remaining level with a single subject move at tick 0.
  LogBuilder& finish_from(int level_index) {
    const auto catalog = tgtest::shipped_catalog();
    for (int i = level_index; i < 6; ++i) {
      const LevelSpec& s = *catalog->levels[static_cast<std::size_t>(i)].base;
      at(i, s.level_id);
      end(s.tick_limit);
    }
    return *this;
  }
  const TelemetryLog& log() const { return log_; }

 private:
  TelemetryLog log_;
  int index_ = 0;
  std::string level_;
};

FeatureVector features(const TelemetryLog& log) { return extract_features(log, *tgtest::shipped_catalog()); }

const ScenarioInstrument& instrument(const std::string& id) {
  for (const auto& i : tgtest::shipped_catalog()->instruments) {
    if (i.instrument_id == id) return i;
  }
  throw std::runtime_error("no instrument " + id);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::ParseError;
}

}  // namespace

TEST(Telemetry, AppendsInTickOrderAndAssignsSeq) {
  LogBuilder b;
  b.at(0, "L1").move(39, {7, 0}).event(40, EventKind::Chat, {{"from", 0}, {"to", 3}, {"text", "hi"}});
  ASSERT_EQ(b.log().events().size(), 2u);
  EXPECT_EQ(b.log().events()[1].kind, EventKind::Chat);
  EXPECT_EQ(b.log().events()[1].seq, 1u);
  EXPECT_EQ(b.log().events()[1].session_id, "s-test");
  EXPECT_EQ(code_of([&] { b.event(38, EventKind::Chat, {{"from", 0}}); }), ErrorCode::OutOfOrder);
}

TEST(Telemetry, LevelEndClosesItsLevel) {
  LogBuilder b;
  b.at(0, "L1").end(200);
  EXPECT_EQ(code_of([&] { b.move(250, {0, 0}); }), ErrorCode::OutOfOrder);
  EXPECT_EQ(code_of([&] { b.at(2, "L3").move(0, {0, 0}); }), ErrorCode::OutOfOrder);
  EXPECT_NO_THROW(b.at(1, "L2").move(0, {3, 6}));
}

TEST(Telemetry, RecordReturnsANewLog) {
  const TelemetryLog empty;
  const TelemetryLog one = record(empty, TelemetryEvent{"s", 0, 0, "L1", 0, EventKind::Chat, {{"from", 0}}});
  EXPECT_TRUE(empty.empty());
  EXPECT_EQ(one.events().size(), 1u);
}

TEST(Telemetry, NdjsonRoundTripIsByteIdentical) {
  LogBuilder b;
  b.at(0, "L1").move(0, {7, 0}).event(0, EventKind::Collect, {{"player", 0}, {"count", 2}, {"points", 2000}});
  b.event(3, EventKind::Chat, {{"from", 0}, {"to", 4}, {"text", "café \"quoted\""}});
  b.finish_from(0);
  const std::string text = b.log().to_ndjson();
  std::istringstream in(text);
  const TelemetryLog back = TelemetryLog::parse_ndjson(in);
  EXPECT_EQ(back.to_ndjson(), text);
  EXPECT_EQ(back.header().participant, "p-test");
}

TEST(Telemetry, TruncatedOrMalformedFilesAreRejected) {
  LogBuilder b;
  b.finish_from(0);
  const std::string text = b.log().to_ndjson();
  std::istringstream truncated(text.substr(0, text.size() - 10));
  EXPECT_EQ(code_of([&] { TelemetryLog::parse_ndjson(truncated); }), ErrorCode::IncompleteLog);
  std::istringstream empty("");
  EXPECT_EQ(code_of([&] { TelemetryLog::parse_ndjson(empty); }), ErrorCode::IncompleteLog);
  std::istringstream headless(text.substr(text.find('\n') + 1));
  EXPECT_EQ(code_of([&] { TelemetryLog::parse_ndjson(headless); }), ErrorCode::ParseError);
  std::string garbled = text;
  garbled.insert(text.find('\n') + 1, "{oops}\n");
  std::istringstream bad(garbled);
  EXPECT_EQ(code_of([&] { TelemetryLog::parse_ndjson(bad); }), ErrorCode::ParseError);
}

TEST(Features, CountsSubjectChats) {
  LogBuilder b;
  b.at(0, "L1");
  for (int t : {5, 6, 9}) b.event(t, EventKind::Chat, {{"from", 0}, {"to", 2}});
  b.event(10, EventKind::Chat, {{"from", 2}, {"to", 0}});
  b.move(11, {7, 0}).end(200).finish_from(1);
  EXPECT_EQ(features(b.log()).chat_count, 3);
}

TEST(Features, ExplorationIsVisitedOverHiddenCells) {
  const LevelSpec& l3 = *tgtest::shipped_catalog()->entry("L3").base;
  const StaticMap map(l3);
  std::vector<Cell> hidden;
  for (const auto& r : l3.hidden_regions) {
    for (Cell c : r.cells) {
      if (!map.solid(c)) hidden.push_back(c);
    }
  }
  ASSERT_EQ(hidden.size() % 2, 0u);
  LogBuilder b2;
  b2.at(0, "L1").end(200).at(1, "L2").end(120).at(2, "L3");
  for (std::size_t i = 0; i < hidden.size() / 2; ++i) b2.move(static_cast<int>(i), hidden[i]);
  b2.move(50, hidden[0]).end(200).finish_from(3);
  const FeatureVector fv = features(b2.log());
  EXPECT_EQ(fv.level("L3").hidden_cells_total, static_cast<int>(hidden.size()));
  EXPECT_EQ(fv.level("L3").hidden_cells_visited, static_cast<int>(hidden.size() / 2));
  EXPECT_DOUBLE_EQ(feature_score(instrument("O1"), fv), 50.0);
}

TEST(Features, PlanningLatencyIsTheFirstMoveTick) {
  LogBuilder b;
  b.at(0, "L1").end(200).at(1, "L2");
  b.event(3, EventKind::Block, {{"player", 0}, {"direction", "N"}});
  b.move(12, {3, 6}).move(13, {3, 7}).end(120).finish_from(2);
  const auto& l2 = features(b.log()).level("L2");
  EXPECT_EQ(l2.planning_latency, 12);
  EXPECT_EQ(l2.cells_moved, 2);
  EXPECT_EQ(l2.move_attempts, 3);
  EXPECT_DOUBLE_EQ(l2.route_overlap, 0.5);
  LogBuilder idle;
  idle.finish_from(0);
  EXPECT_EQ(features(idle.log()).level("L2").planning_latency, 120);
}

TEST(Features, SoloLevelsHaveNoTeamScore) {
  LogBuilder b;
  b.at(0, "L1").move(1, {7, 0}).end(200, {{0, 5000}, {1, 2000}}).finish_from(1);
  const FeatureVector fv = features(b.log());
  const auto scores = scenario_scores(fv, tgtest::shipped_catalog()->instruments);
  for (const auto& s : scores) {
    EXPECT_EQ(s.team_score, 0.0) << s.instrument_id;
    EXPECT_EQ(s.team_size, 1) << s.instrument_id;
  }
  EXPECT_EQ(fv.level("L1").others_points, 2000);
}

TEST(Features, TeamSizeScalesByMaxMembers) {
  LogBuilder b;
  b.at(0, "L1").event(0, EventKind::TeamSelect, {{"members", {1, 2}}}).move(1, {7, 0});
  b.end(200, {{0, 4000}, {1, 1000}, {2, 3000}, {3, 500}}, {1, 2}).finish_from(1);
  const FeatureVector fv = features(b.log());
  ScenarioInstrument e1 = instrument("E1");
  e1.params["max_members"] = 6;
  EXPECT_DOUBLE_EQ(feature_score(e1, fv), 100.0 * 2 / 6);
  const auto scores = scenario_scores(fv, {e1});
  EXPECT_EQ(scores[0].team_size, 3);
  EXPECT_DOUBLE_EQ(scores[0].team_score, 4.0);
  EXPECT_DOUBLE_EQ(scores[0].total_score, scores[0].player_score + 4.0);
  EXPECT_EQ(fv.members_ever, (std::set<PlayerId>{1, 2}));
  EXPECT_EQ(fv.nonperformer_inclusions, 1);  // slot 1 is lazy
}

TEST(Features, TrapScoresLowCollectionHigh) {
  LogBuilder b;
  b.at(0, "L1").move(0, {7, 0}).end(200).at(1, "L2").end(120).at(2, "L3").end(200).at(3, "L4").end(150);
  b.at(4, "L5").event(9, EventKind::Collect, {{"player", 0}, {"count", 23}}).end(120).finish_from(5);
  EXPECT_DOUBLE_EQ(feature_score(instrument("N1"), features(b.log())), 0.0);
  LogBuilder none;
  none.at(0, "L1").move(0, {7, 0}).end(200).finish_from(1);
  EXPECT_DOUBLE_EQ(feature_score(instrument("N1"), features(none.log())), 100.0);
}

TEST(Features, InactiveSessionsScoreNothing) {
  LogBuilder b;
  b.at(0, "L1").event(4, EventKind::Chat, {{"from", 0}}).end(200).finish_from(1);
  const FeatureVector fv = features(b.log());
  EXPECT_FALSE(fv.active);
  for (const auto& s : scenario_scores(fv, tgtest::shipped_catalog()->instruments)) EXPECT_EQ(s.player_score, 0.0);
}

TEST(Features, MissingLevelsNeedAbandonment) {
  LogBuilder partial;
  partial.at(0, "L1").end(200).at(1, "L2").move(0, {3, 6});
  EXPECT_EQ(code_of([&] { features(partial.log()); }), ErrorCode::IncompleteLog);
  LogBuilder short_log;
  short_log.at(0, "L1").end(200);
  EXPECT_EQ(code_of([&] { features(short_log.log()); }), ErrorCode::IncompleteLog);
  LogBuilder abandoned;
  abandoned.at(0, "L1").move(0, {7, 0}).end(200).at(1, "L2").end(40, {{0, 0}}, {}, true);
  const FeatureVector fv = features(abandoned.log());
  EXPECT_TRUE(fv.abandoned);
  EXPECT_FALSE(fv.level("L4").played);
}

TEST(Features, VariantCountsForItsSlot) {
  LogBuilder b;
  b.at(0, "L1").move(0, {7, 0}).end(200).at(1, "L2").end(120);
  b.at(2, "L3-hard").event(0, EventKind::DifficultyChoice, {{"slot", "L3"}, {"accepted", true}}).end(200);
  b.finish_from(3);
  const FeatureVector fv = features(b.log());
  EXPECT_EQ(fv.level("L3").level_id, "L3-hard");
  EXPECT_DOUBLE_EQ(feature_score(instrument("O2"), fv), 100.0);
}

// Random logs: S_P stays in [0, cap], S_P <= S_T, and extraction is pure.
TEST(FeatureProperties, FuzzedLogsStayInBounds) {
  const auto catalog = tgtest::shipped_catalog();
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 300; ++trial) {
    LogBuilder b;
    for (int i = 0; i < 6; ++i) {
      const bool hard = i == 2 && (gen() & 1);
      const LevelSpec& s = hard ? *catalog->levels[2].variant : *catalog->levels[static_cast<std::size_t>(i)].base;
      b.at(i, s.level_id);
      int tick = 0;
      std::set<PlayerId> team;
      if (gen() & 1) {
        for (PlayerId p = 1; p <= 5; ++p) {
          if (gen() & 1) team.insert(p);
        }
        json members = json::array();
        for (PlayerId p : team) members.push_back(p);
        b.event(0, EventKind::TeamSelect, {{"members", members}});
      }
      const int n = static_cast<int>(gen() % 60);
      for (int k = 0; k < n; ++k) {
        tick += static_cast<int>(gen() % 3);
        if (tick >= s.tick_limit) break;
        const Cell c{static_cast<int>(gen() % static_cast<unsigned>(s.height)),
                     static_cast<int>(gen() % static_cast<unsigned>(s.width))};
        switch (gen() % 4) {
          case 0: b.move(tick, c); break;
          case 1: b.event(tick, EventKind::Chat, {{"from", 0}}); break;
          case 2: b.event(tick, EventKind::Collect, {{"player", 0}, {"count", 1 + gen() % 4}}); break;
          default: b.event(tick, EventKind::Block, {{"player", 0}}); break;
        }
      }
      std::map<PlayerId, Millipoints> gross;
      for (const auto& [slot, cell] : s.spawn_points) {
        (void)cell;
        gross[slot] = static_cast<Millipoints>(gen() % 100) * 1000;
      }
      b.end(s.tick_limit, gross, team);
    }
    const FeatureVector a = features(b.log());
    const FeatureVector again = features(b.log());
    ASSERT_EQ(a.to_json(), again.to_json());
    for (const auto& s : scenario_scores(a, catalog->instruments)) {
      ASSERT_GE(s.player_score, 0.0) << s.instrument_id;
      ASSERT_LE(s.player_score, s.cap) << s.instrument_id;
      ASSERT_LE(s.player_score, s.total_score) << s.instrument_id;
      ASSERT_GE(s.team_score, 0.0);
    }
  }
}
