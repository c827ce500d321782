#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace traitgrid {

// Nonnegative rational used for emitter rates so that bubble spawning is exact.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Rational&, const Rational&) = default;
};

Rational make_rational(std::int64_t num, std::int64_t den);

// Accepts "p/q", an integer, or a decimal literal with at most 9 fractional digits.
Rational parse_rational(const std::string& text);

std::string to_string(const Rational& r);

void to_json(nlohmann::json& j, const Rational& r);
void from_json(const nlohmann::json& j, Rational& r);

}  // namespace traitgrid
