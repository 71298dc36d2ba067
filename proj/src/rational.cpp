#include "thermomerge/rational.hpp"

#include <charconv>

#include "thermomerge/error.hpp"

namespace thermomerge {

namespace {

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("bad rational '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  std::int64_t num = parse_int(text.substr(0, slash), text);
  std::int64_t den = slash == std::string_view::npos ? 1 : parse_int(text.substr(slash + 1), text);
  if (den == 0) throw Error("rational '" + std::string(text) + "' has a zero denominator");
  return Rational(num, den);
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

}  // namespace thermomerge
