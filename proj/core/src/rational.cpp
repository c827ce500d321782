#include "traitgrid/rational.hpp"

#include <charconv>
#include <numeric>

#include <nlohmann/json.hpp>

#include "traitgrid/error.hpp"

namespace traitgrid {

Rational make_rational(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) {
    throw Error(ErrorCode::InvalidSpec, "rational must be nonnegative with positive denominator");
  }
  const std::int64_t g = std::gcd(num, den);
  return {num / (g == 0 ? 1 : g), den / (g == 0 ? 1 : g)};
}

namespace {

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Rational parse_rational(const std::string& text) {
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    return make_rational(parse_int(std::string_view(text).substr(0, slash)),
                         parse_int(std::string_view(text).substr(slash + 1)));
  }
  if (const auto dot = text.find('.'); dot != std::string::npos) {
    const std::string_view whole = std::string_view(text).substr(0, dot);
    const std::string_view frac = std::string_view(text).substr(dot + 1);
    if (frac.size() > 9) throw Error(ErrorCode::ParseError, "too many decimals in '" + text + "'");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::int64_t w = whole.empty() ? 0 : parse_int(whole);
    const std::int64_t f = frac.empty() ? 0 : parse_int(frac);
    return make_rational(w * den + f, den);
  }
  return make_rational(parse_int(text), 1);
}

std::string to_string(const Rational& r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

void to_json(nlohmann::json& j, const Rational& r) { j = to_string(r); }

void from_json(const nlohmann::json& j, Rational& r) {
  if (j.is_string()) {
    r = parse_rational(j.get<std::string>());
  } else if (j.is_number_integer()) {
    r = make_rational(j.get<std::int64_t>(), 1);
  } else if (j.is_number()) {
    // Round-trip the literal through its shortest decimal form.
    std::string s = j.dump();
    if (s.find('e') != std::string::npos || s.find('E') != std::string::npos) {
      throw Error(ErrorCode::ParseError, "exponent notation not allowed for rates: " + s);
    }
    r = parse_rational(s);
  } else {
    throw Error(ErrorCode::ParseError, "rate must be a number or \"p/q\" string");
  }
}

}  // namespace traitgrid
