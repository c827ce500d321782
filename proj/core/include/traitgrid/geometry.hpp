#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace traitgrid {

// Grid coordinates are (row, col); row 0 is the top edge, North decreases row.
struct Cell {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Direction : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

// Fixed tie-break order used everywhere a direction must be chosen.
inline constexpr std::array<Direction, 4> kDirectionOrder{Direction::North, Direction::East,
                                                          Direction::South, Direction::West};

constexpr Cell offset(Direction d) {
  switch (d) {
    case Direction::North: return {-1, 0};
    case Direction::East: return {0, 1};
    case Direction::South: return {1, 0};
    case Direction::West: return {0, -1};
  }
  return {0, 0};
}

constexpr Cell neighbor(Cell c, Direction d) {
  const Cell o = offset(d);
  return {c.row + o.row, c.col + o.col};
}

// Unit vector perpendicular to a heading; lateral jitter is applied along it.
constexpr Cell lateral_axis(Direction d) {
  return (d == Direction::North || d == Direction::South) ? Cell{0, 1} : Cell{1, 0};
}

constexpr Cell translate(Cell c, Cell delta, int times = 1) {
  return {c.row + delta.row * times, c.col + delta.col * times};
}

constexpr int manhattan(Cell a, Cell b) {
  return (a.row > b.row ? a.row - b.row : b.row - a.row) +
         (a.col > b.col ? a.col - b.col : b.col - a.col);
}

// Direction that moves `from` onto the adjacent cell `to`, if they are adjacent.
std::optional<Direction> direction_between(Cell from, Cell to);

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view text);

// Dense per-cell storage for a width x height grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), cells_(static_cast<std::size_t>(width * height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }

  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }

  T& operator[](Cell c) { return cells_[index(c)]; }
  const T& operator[](Cell c) const { return cells_[index(c)]; }

  const std::vector<T>& data() const { return cells_; }
  std::vector<T>& data() { return cells_; }

  Cell cell_at(std::size_t i) const {
    return {static_cast<int>(i) / width_, static_cast<int>(i) % width_};
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row * width_ + c.col); }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

void to_json(nlohmann::json& j, const Cell& c);
void from_json(const nlohmann::json& j, Cell& c);

}  // namespace traitgrid
