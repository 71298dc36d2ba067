#pragma once

// Exact rational frequencies.

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace thermomerge {

using Rational = boost::rational<std::int64_t>;

// "p/q" or "p"; the result is reduced. Zero denominators are an error.
Rational parse_rational(std::string_view text);
// "p/q", or "p" when the denominator is 1.
std::string to_string(const Rational& r);
double to_double(const Rational& r);

}  // namespace thermomerge
