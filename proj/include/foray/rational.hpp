#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace foray {

/// Exact amounts in token base units. All ledgers, models and goal
/// evaluation use this type; nothing in the pipeline touches floating point.
using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

/// Parses "42", "-3", "0.125" or "7/3". Throws foray::Error("SyntaxError").
Rational parse_rational(std::string_view text);

/// Renders integers plainly and everything else as "num/den".
std::string format_rational(const Rational& value);

Integer floor_rational(const Rational& value);
Integer ceil_rational(const Rational& value);

inline bool is_integral(const Rational& value) {
  return boost::multiprecision::denominator(value) == 1;
}

}  // namespace foray
