#include "foray/rational.hpp"

#include "foray/error.hpp"

#include <cctype>

namespace foray {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

Integer parse_integer(std::string_view digits) {
  Integer value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  return value;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view body = text;
  bool negative = false;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  Rational value;
  if (auto slash = body.find('/'); slash != std::string_view::npos) {
    auto num = body.substr(0, slash);
    auto den = body.substr(slash + 1);
    if (!all_digits(num) || !all_digits(den)) {
      throw Error("SyntaxError", std::string(text), "malformed fraction");
    }
    Integer d = parse_integer(den);
    if (d == 0) throw Error("SyntaxError", std::string(text), "zero denominator");
    value = Rational(parse_integer(num), d);
  } else if (auto dot = body.find('.'); dot != std::string_view::npos) {
    auto whole = body.substr(0, dot);
    auto frac = body.substr(dot + 1);
    if ((!whole.empty() && !all_digits(whole)) || (!frac.empty() && !all_digits(frac)) ||
        (whole.empty() && frac.empty())) {
      throw Error("SyntaxError", std::string(text), "malformed decimal");
    }
    Integer scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    Integer n = (whole.empty() ? Integer(0) : parse_integer(whole)) * scale +
                (frac.empty() ? Integer(0) : parse_integer(frac));
    value = Rational(n, scale);
  } else {
    if (!all_digits(body)) {
      throw Error("SyntaxError", std::string(text), "expected a number");
    }
    value = Rational(parse_integer(body));
  }
  return negative ? Rational(-value) : value;
}

std::string format_rational(const Rational& value) {
  if (is_integral(value)) return boost::multiprecision::numerator(value).str();
  return boost::multiprecision::numerator(value).str() + "/" +
         boost::multiprecision::denominator(value).str();
}

Integer floor_rational(const Rational& value) {
  const Integer& n = boost::multiprecision::numerator(value);
  const Integer& d = boost::multiprecision::denominator(value);
  Integer q = n / d;  // truncates toward zero
  if (n % d != 0 && n < 0) q -= 1;
  return q;
}

Integer ceil_rational(const Rational& value) {
  Integer f = floor_rational(value);
  return Rational(f) == value ? f : f + 1;
}

}  // namespace foray
