#pragma once

#include "foray/rational.hpp"

#include <map>
#include <string>

namespace foray {

/// Solver assignment: SMT symbol name to exact value.
using Model = std::map<std::string, Rational>;

}  // namespace foray
