#include "traitgrid/geometry.hpp"

#include <nlohmann/json.hpp>

#include "traitgrid/error.hpp"

namespace traitgrid {

std::optional<Direction> direction_between(Cell from, Cell to) {
  for (Direction d : kDirectionOrder) {
    if (neighbor(from, d) == to) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::North: return "N";
    case Direction::East: return "E";
    case Direction::South: return "S";
    case Direction::West: return "W";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view text) {
  if (text == "N") return Direction::North;
  if (text == "E") return Direction::East;
  if (text == "S") return Direction::South;
  if (text == "W") return Direction::West;
  return std::nullopt;
}

void to_json(nlohmann::json& j, const Cell& c) { j = nlohmann::json::array({c.row, c.col}); }

void from_json(const nlohmann::json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw Error(ErrorCode::ParseError, "cell must be [row, col], got " + j.dump());
  }
  c.row = j[0].get<int>();
  c.col = j[1].get<int>();
}

}  // namespace traitgrid
