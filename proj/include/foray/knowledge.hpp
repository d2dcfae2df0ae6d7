#pragma once

// Learned clauses. A clause speaks about the holes of one edge path: it
// applies to every path extending `prefix`, or only to `prefix` itself when
// `exact` is set.

#include "foray/smt.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace foray {

struct Clause {
  std::string name;  // kb<n>
  smt::Expr formula;
  std::vector<std::size_t> prefix;
  bool exact = false;

  std::size_t sketch = 0;   // index of the sketch it was learned on
  std::string model_hash;   // content hash of the blocked model
  std::string reason;       // validation failure

  bool applies_to(const std::vector<std::size_t>& path) const {
    if (exact) return path == prefix;
    return path.size() >= prefix.size() &&
           std::equal(prefix.begin(), prefix.end(), path.begin());
  }
};

using KnowledgeBase = std::vector<Clause>;

/// Clauses of `kb` that apply to `path`, as named atoms.
inline std::vector<smt::NamedAtom> applicable(const KnowledgeBase& kb,
                                              const std::vector<std::size_t>& path) {
  std::vector<smt::NamedAtom> out;
  for (const auto& c : kb) {
    if (c.applies_to(path)) out.push_back({c.name, "kb", c.formula});
  }
  return out;
}

}  // namespace foray
