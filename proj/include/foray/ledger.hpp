#pragma once

#include "foray/rational.hpp"

#include <map>
#include <string>
#include <utility>

namespace foray {

/// (token, address) -> balance in base units. Missing entries read as zero.
using Ledger = std::map<std::pair<std::string, std::string>, Rational>;

inline Rational balance_of(const Ledger& ledger, const std::string& token,
                           const std::string& address) {
  auto it = ledger.find({token, address});
  return it == ledger.end() ? Rational(0) : it->second;
}

}  // namespace foray
