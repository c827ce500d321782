#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "traitgrid/error.hpp"
#include "traitgrid/policies.hpp"

using namespace traitgrid;
using tgtest::emitter;
using tgtest::open_level;

namespace {

// 5x5, flow only at (0,4): an emitter at (1,4) blowing North with lifetime 2.
LevelSpec corner_flow(std::map<PlayerId, Cell> spawns, std::map<PlayerId, PolicyKind> ai = {}) {
  LevelSpec spec = open_level(5, 5, std::move(spawns), std::move(ai));
  spec.emitters.push_back(emitter({1, 4}, Direction::North, {1, 1}, 2));
  return spec;
}

MoveCommand decide_for(const LevelState& s, PlayerId self, PolicyConfig cfg) {
  return decide(cfg, Observation{s, kSubjectId, self});
}

}  // namespace

TEST(Pathing, CorridorPathRunsEast) {
  const LevelState s = create_level(open_level(5, 1, {{0, {0, 0}}}));
  const auto path = shortest_path(s, {0, 0}, {0, 4});
  ASSERT_TRUE(path.has_value());
  ASSERT_EQ(path->size(), 4u);
  EXPECT_EQ(direction_between({0, 0}, path->front()), Direction::East);
  EXPECT_EQ(path->back(), (Cell{0, 4}));
}

TEST(Pathing, SameCellIsEmptyAndWalledOffIsAbsent) {
  LevelSpec spec = open_level(5, 3, {{0, {0, 0}}});
  spec.walls = {{0, 3}, {1, 3}, {2, 3}};
  const LevelState s = create_level(spec);
  const auto self = shortest_path(s, {1, 1}, {1, 1});
  ASSERT_TRUE(self.has_value());
  EXPECT_TRUE(self->empty());
  EXPECT_FALSE(shortest_path(s, {0, 0}, {1, 4}).has_value());
  EXPECT_EQ((distances_from(s, {0, 0})[Cell{1, 4}]), -1);
}

TEST(Pathing, TiesFollowDirectionOrder) {
  const LevelState s = create_level(open_level(3, 3, {{0, {0, 0}}}));
  const auto path = shortest_path(s, {0, 0}, {2, 2});
  ASSERT_TRUE(path.has_value());
  const std::vector<Cell> expected{{0, 1}, {0, 2}, {1, 2}, {2, 2}};
  EXPECT_EQ(*path, expected);
}

TEST(Pathing, AiRulesTreatUnrevealedCellsAsWalls) {
  LevelSpec spec = open_level(5, 1, {{0, {0, 0}}});
  spec.hidden_regions.push_back({"h", {{0, 2}}, false});
  const LevelState s = create_level(spec);
  EXPECT_FALSE(shortest_path(s, {0, 0}, {0, 4}).has_value());
  EXPECT_TRUE(shortest_path(s, {0, 0}, {0, 4}, PathRules{true, true}).has_value());
  const LevelState revealed = reveal_region(s, "h");
  EXPECT_TRUE(shortest_path(revealed, {0, 0}, {0, 4}).has_value());
}

TEST(Pathing, MatchesBreadthFirstOracleOnRandomGrids) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    LevelSpec spec = open_level(10, 10, {{0, {0, 0}}});
    spec.walls = tgtest::random_walls(gen, 10, 10, 0.25, {{0, 0}});
    const LevelState s = create_level(spec);
    const Cell from{static_cast<int>(gen() % 10), static_cast<int>(gen() % 10)};
    const Cell to{static_cast<int>(gen() % 10), static_cast<int>(gen() % 10)};
    if (s.map->solid(from)) continue;
    // The subject at (0,0) is an obstacle to every path that does not start or end there.
    std::set<Cell> blocked;
    if (from != Cell{0, 0} && to != Cell{0, 0}) blocked.insert({0, 0});
    const int expected = tgtest::oracle::bfs_distance(spec, from, to, blocked);
    const auto path = shortest_path(s, from, to);
    if (expected < 0) {
      EXPECT_FALSE(path.has_value());
      continue;
    }
    ASSERT_TRUE(path.has_value());
    ASSERT_EQ(static_cast<int>(path->size()), expected);
    Cell cur = from;
    for (Cell c : *path) {
      ASSERT_EQ(manhattan(cur, c), 1);
      ASSERT_FALSE(s.map->solid(c));
      cur = c;
    }
  }
}

TEST(Flow, SingleStraightEmitterGivesUnitFlowDownstream) {
  LevelSpec spec = open_level(8, 3, {{0, {0, 0}}});
  spec.emitters.push_back(emitter({1, 0}, Direction::East, {1, 1}, 5));
  const FlowField f = flow_field(create_level(spec));
  for (int k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(f.at({1, k}), 1.0) << k;
  EXPECT_DOUBLE_EQ(f.at({1, 5}), 0.0);
  EXPECT_DOUBLE_EQ(f.at({0, 1}), 0.0);
  EXPECT_EQ(f.argmax(), (Cell{1, 1}));
}

TEST(Flow, NoEmittersGivesZeroField) {
  const FlowField f = flow_field(create_level(open_level(4, 4, {{0, {0, 0}}})));
  for (double v : f.grid().data()) EXPECT_EQ(v, 0.0);
  EXPECT_FALSE(f.argmax().has_value());
  EXPECT_TRUE(f.positive_cells().empty());
}

TEST(Flow, FieldIsAdditiveAndLinearInRate) {
  auto base = [] {
    LevelSpec spec = open_level(9, 9, {{0, {0, 0}}});
    spec.walls = {{4, 6}, {2, 2}};
    return spec;
  };
  const EmitterSpec a = emitter({4, 1}, Direction::East, {1, 2}, 7, 2);
  const EmitterSpec b = emitter({8, 4}, Direction::North, {2, 3}, 6, 1);
  LevelSpec only_a = base();
  only_a.emitters = {a};
  LevelSpec only_b = base();
  only_b.emitters = {b};
  LevelSpec both = base();
  both.emitters = {a, b};
  EmitterSpec a2 = a;
  a2.rate = {1, 1};
  LevelSpec doubled = base();
  doubled.emitters = {a2};
  const FlowField fa = flow_field(create_level(only_a));
  const FlowField fb = flow_field(create_level(only_b));
  const FlowField fab = flow_field(create_level(both));
  const FlowField f2 = flow_field(create_level(doubled));
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      EXPECT_NEAR(fab.at({r, c}), fa.at({r, c}) + fb.at({r, c}), 1e-12);
      EXPECT_NEAR(f2.at({r, c}), 2.0 * fa.at({r, c}), 1e-12);
    }
  }
}

// The analytic field against the mean bubble count per cell in a long simulation.
TEST(Flow, AgreesWithMonteCarloBubbleCounts) {
  LevelSpec spec = open_level(12, 9, {{0, {0, 0}}});
  spec.walls = {{3, 6}, {5, 4}};
  spec.emitters.push_back(emitter({4, 1}, Direction::East, {1, 1}, 8, 2));
  spec.tick_limit = 200000;
  const FlowField analytic = flow_field(create_level(spec));
  LevelState s = create_level(spec);
  Grid<double> counts(spec.width, spec.height, 0.0);
  const int warmup = 20;
  const int ticks = 120000;
  for (int t = 0; t < warmup + ticks; ++t) {
    s = step(std::move(s), {}).state;
    if (t < warmup) continue;
    for (const auto& b : s.bubbles) {
      if (b.age > 0) counts[b.position] += 1.0;
    }
  }
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const double expected = analytic.at({r, c});
      const double observed = counts[Cell{r, c}] / ticks;
      if (expected >= 0.1) {
        EXPECT_NEAR(observed, expected, 0.05 * expected) << r << "," << c;
      } else if (expected == 0.0) {
        EXPECT_EQ(observed, 0.0) << r << "," << c;
      }
    }
  }
}

TEST(Flow, HiddenEmitterCountsOnlyOnceRevealed) {
  LevelSpec spec = open_level(6, 3, {{0, {0, 0}}});
  spec.hidden_regions.push_back({"h", {{1, 3}, {1, 4}, {1, 5}}, false});
  EmitterSpec e = emitter({1, 3}, Direction::East, {1, 1}, 3);
  e.hidden = true;
  spec.emitters.push_back(e);
  const LevelState s = create_level(spec);
  EXPECT_TRUE(flow_field(s).positive_cells().empty());
  const LevelState r = reveal_region(s, "h");
  EXPECT_EQ(r.regions[0].revealed_tick, 1);
  EXPECT_TRUE(flow_field_as_of(r, 0).positive_cells().empty());
  EXPECT_DOUBLE_EQ(flow_field_as_of(r, 1).at({1, 4}), 1.0);
}

TEST(Policies, ValidateRejectsBadPeriods) {
  EXPECT_NO_THROW(validate(PolicyConfig{}));
  try {
    validate(PolicyConfig{PolicyKind::Lazy, 1, 5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig);
  }
  EXPECT_THROW(validate(PolicyConfig{PolicyKind::Adaptive, 3, 0}), Error);
}

TEST(Policies, GreedyStepsTowardNearestFlow) {
  const LevelState s = create_level(corner_flow({{0, {4, 0}}, {1, {0, 0}}}));
  const auto cmd = decide_for(s, 1, {PolicyKind::Greedy});
  EXPECT_EQ(cmd.player_id, 1u);
  EXPECT_EQ(cmd.move, Direction::East);
}

TEST(Policies, LazyMovesOnlyOnItsPeriod) {
  LevelState s = create_level(corner_flow({{0, {4, 0}}, {1, {0, 0}}}));
  s.tick = 4;
  EXPECT_FALSE(decide_for(s, 1, {PolicyKind::Lazy, 3, 5}).move.has_value());
  s.tick = 3;
  EXPECT_EQ(decide_for(s, 1, {PolicyKind::Lazy, 3, 5}).move, Direction::East);
}

TEST(Policies, ImitatorCopiesSubjectsLastMove) {
  LevelState s = create_level(open_level(5, 5, {{0, {4, 0}}, {1, {2, 2}}}, {{1, PolicyKind::Imitator}}));
  EXPECT_FALSE(decide_for(s, 1, {PolicyKind::Imitator}).move.has_value());
  s = step(std::move(s), std::vector<MoveCommand>{MoveCommand::Move(0, Direction::North)}).state;
  EXPECT_EQ(decide_for(s, 1, {PolicyKind::Imitator}).move, Direction::North);
  // An illegal copy becomes Stay.
  s.players[1].position = {0, 2};
  EXPECT_FALSE(decide_for(s, 1, {PolicyKind::Imitator}).move.has_value());
}

TEST(Policies, ImitatorTraceIsSubjectTraceShiftedByOneTick) {
  LevelState s = create_level(open_level(200, 100, {{0, {50, 45}}, {1, {50, 130}}}, {{1, PolicyKind::Imitator}}));
  std::mt19937_64 gen(4);
  std::vector<std::optional<Direction>> subject_moves;
  std::vector<std::optional<Direction>> imitator_moves;
  for (int t = 0; t < 40; ++t) {
    const auto ai = decide_for(s, 1, {PolicyKind::Imitator});
    const auto d = static_cast<Direction>(gen() % 4);
    const std::vector<MoveCommand> cmds{MoveCommand::Move(0, d), ai};
    s = step(std::move(s), cmds).state;
    subject_moves.push_back(s.players[0].last_move);
    imitator_moves.push_back(s.players[1].last_move);
  }
  EXPECT_FALSE(imitator_moves[0].has_value());
  for (std::size_t t = 1; t < subject_moves.size(); ++t) EXPECT_EQ(imitator_moves[t], subject_moves[t - 1]) << t;
}

TEST(Policies, AdaptiveHeadsForTheFlowArgmax) {
  LevelSpec spec = open_level(9, 9, {{0, {8, 8}}, {1, {0, 0}}}, {{1, PolicyKind::Adaptive}});
  spec.emitters.push_back(emitter({6, 2}, Direction::East, {1, 1}, 5, 1));
  spec.emitters.push_back(emitter({2, 7}, Direction::West, {2, 1}, 3));
  const LevelState s = create_level(spec);
  const auto target = flow_field(s).argmax();
  ASSERT_TRUE(target.has_value());
  EXPECT_EQ(*target, (Cell{2, 5}));
  const auto path = shortest_path(s, {0, 0}, *target);
  ASSERT_TRUE(path && !path->empty());
  EXPECT_EQ(decide_for(s, 1, {PolicyKind::Adaptive}).move, direction_between({0, 0}, path->front()));
}

TEST(Policies, AdaptiveUsesFieldFromLastRefresh) {
  LevelSpec spec = open_level(6, 3, {{0, {0, 0}}, {1, {2, 0}}}, {{1, PolicyKind::Adaptive}});
  spec.hidden_regions.push_back({"h", {{1, 3}, {1, 4}, {1, 5}}, false});
  EmitterSpec e = emitter({1, 3}, Direction::East, {1, 1}, 3);
  e.hidden = true;
  spec.emitters.push_back(e);
  LevelState s = reveal_region(create_level(spec), "h");
  s.tick = 4;  // refresh 5: the field is read as of tick 0, before the reveal
  EXPECT_FALSE(decide_for(s, 1, {PolicyKind::Adaptive, 3, 5}).move.has_value());
  s.tick = 5;
  EXPECT_TRUE(decide_for(s, 1, {PolicyKind::Adaptive, 3, 5}).move.has_value());
}

TEST(Policies, IrritatorCutsIntoSubjectsPredictedPath) {
  const LevelState s = create_level(corner_flow({{0, {0, 0}}, {1, {2, 2}}}, {{1, PolicyKind::Irritator}}));
  const auto cmd = decide_for(s, 1, {PolicyKind::Irritator});
  ASSERT_TRUE(cmd.move.has_value());
  // The first free predicted cell is (0,1); the move must shorten the way there.
  const LevelSpec& spec = *s.spec;
  const Cell next = neighbor({2, 2}, *cmd.move);
  EXPECT_EQ(tgtest::oracle::bfs_distance(spec, next, {0, 1}), tgtest::oracle::bfs_distance(spec, {2, 2}, {0, 1}) - 1);

  // Parked on the subject's goal it holds still.
  const LevelState parked = create_level(corner_flow({{0, {0, 0}}, {1, {0, 4}}}, {{1, PolicyKind::Irritator}}));
  EXPECT_FALSE(decide_for(parked, 1, {PolicyKind::Irritator}).move.has_value());
}

TEST(Policies, HumanSlotsAndUnknownSelvesStay) {
  const LevelState s = create_level(corner_flow({{0, {0, 0}}, {1, {2, 2}}}));
  EXPECT_FALSE(decide_for(s, 0, {PolicyKind::Greedy}).move.has_value());
  EXPECT_FALSE(decide_for(s, 9, {PolicyKind::Greedy}).move.has_value());
}

// Greedy's choice is a first step of a BFS-shortest route to the nearest flow cell.
TEST(PolicyProperties, GreedyMatchesBreadthFirstOracle) {
  std::mt19937_64 gen(31);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    LevelSpec spec = open_level(10, 10, {{0, {9, 9}}, {1, {0, 0}}});
    const Cell em{static_cast<int>(gen() % 10), static_cast<int>(gen() % 10)};
    if (em == Cell{9, 9} || em == Cell{0, 0}) continue;
    spec.emitters.push_back(emitter(em, static_cast<Direction>(gen() % 4), {1, 2}, 5, 1));
    spec.walls = tgtest::random_walls(gen, 10, 10, 0.2, {{9, 9}, {0, 0}, em});
    const LevelState s = create_level(spec);
    const FlowField f = flow_field(s);
    int best = -1;
    for (Cell c : f.positive_cells()) {
      if (c == Cell{9, 9}) continue;
      const int d = tgtest::oracle::bfs_distance(spec, {0, 0}, c, {{9, 9}});
      if (d >= 0 && (best < 0 || d < best)) best = d;
    }
    const auto cmd = decide_for(s, 1, {PolicyKind::Greedy});
    if (best <= 0) {
      EXPECT_FALSE(cmd.move.has_value());
      continue;
    }
    ASSERT_TRUE(cmd.move.has_value());
    const Cell next = neighbor({0, 0}, *cmd.move);
    int best_after = -1;
    for (Cell c : f.positive_cells()) {
      if (c == Cell{9, 9}) continue;
      const int d = tgtest::oracle::bfs_distance(spec, next, c, {{9, 9}});
      if (d >= 0 && (best_after < 0 || d < best_after)) best_after = d;
    }
    EXPECT_EQ(best_after, best - 1);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(PolicyProperties, DecisionsAreLegalPureAndDeterministic) {
  const auto catalog = tgtest::shipped_catalog();
  for (const auto& entry : catalog->levels) {
    LevelState s = create_level(entry.base);
    for (int t = 0; t < 40 && !s.finished(); ++t) {
      std::vector<MoveCommand> cmds;
      for (const auto& p : s.players) {
        if (p.kind.human) continue;
        const auto before = canonical_bytes(s);
        const PolicyConfig cfg{p.kind.policy};
        const auto a = decide_for(s, p.player_id, cfg);
        const auto b = decide_for(s, p.player_id, cfg);
        ASSERT_EQ(a, b);
        ASSERT_EQ(before, canonical_bytes(s));
        ASSERT_TRUE(is_legal(s, p.player_id, a.move, PathRules{true, true}))
            << entry.slot << " player " << p.player_id << " tick " << s.tick;
        cmds.push_back(a);
      }
      s = step(std::move(s), cmds).state;
    }
  }
}
