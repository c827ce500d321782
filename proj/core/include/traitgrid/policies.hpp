#pragma once

#include <optional>
#include <vector>

#include "traitgrid/world.hpp"

namespace traitgrid {

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Greedy;
  int lazy_period = 3;
  int adaptive_refresh = 5;
};

void validate(const PolicyConfig& cfg);

struct Observation {
  const LevelState& state;
  PlayerId subject_id = kSubjectId;
  PlayerId self_id = 0;
};

// Expected bubbles per tick at each cell.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height) : values_(width, height, 0.0) {}

  double at(Cell c) const { return values_.contains(c) ? values_[c] : 0.0; }
  double& operator[](Cell c) { return values_[c]; }
  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  const Grid<double>& grid() const { return values_; }

  // Row-major scan; ties resolve to the smallest row, then column.
  std::optional<Cell> argmax() const;
  std::vector<Cell> positive_cells() const;

 private:
  Grid<double> values_;
};

// Which cells a path may cross.
struct PathRules {
  // AIs treat unrevealed hidden cells as walls; the subject may walk into them.
  bool hidden_passable = false;
  // Other players' cells are obstacles (the destination excepted).
  bool players_block = true;
};

// A path is the list of cells after `from`, ending at `to`. Empty when from == to.
using Path = std::vector<Cell>;

// BFS over 4-neighbour cells. Among shortest paths the one whose direction
// sequence is lexicographically smallest under N,E,S,W is returned.
std::optional<Path> shortest_path(const LevelState& state, Cell from, Cell to, PathRules rules = {});

// BFS distances from `from` (-1 where unreachable) under the same rules.
Grid<int> distances_from(const LevelState& state, Cell from, PathRules rules = {});

// Analytic field for all currently visible emitters.
FlowField flow_field(const LevelState& state);
// Same, but a hidden emitter only counts if its region was revealed by `as_of_tick`.
FlowField flow_field_as_of(const LevelState& state, int as_of_tick);

// Nearest cell with positive flow that is free (or `from` itself); ties by row then column.
std::optional<Cell> nearest_flow_cell(const LevelState& state, const FlowField& field, Cell from, PathRules rules = {});

MoveCommand decide(const PolicyConfig& policy, const Observation& obs);

// True when `move` for `player` would not be blocked against the current snapshot.
bool is_legal(const LevelState& state, PlayerId player, std::optional<Direction> move, PathRules rules = {});

}  // namespace traitgrid
