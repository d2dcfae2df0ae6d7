#pragma once

// Breadth-first search for attack sketches over the token flow graph. An
// edge is taken only when the path so far, the edge's Φ and the learned
// clauses are jointly satisfiable.

#include "foray/afl.hpp"
#include "foray/goal.hpp"
#include "foray/knowledge.hpp"
#include "foray/sim.hpp"
#include "foray/solver.hpp"
#include "foray/tfg.hpp"

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace foray::sketch {

struct SketchBudget {
  std::size_t max_depth = 5;
  std::size_t max_sketches = 64;
  int probe_timeout_ms = 10000;
};

struct SearchState {
  std::vector<std::size_t> path;  // edge ids
  std::set<std::string> held;     // token nodes reached, possibly ε
  smt::ConstraintSet omega;

  std::size_t depth() const { return path.size(); }
};

/// Empty path; T holds the tokens the attacker owns in s0, or ε when none.
SearchState init_search(const tfg::TokenFlowGraph& g, const sim::ChainState& s0);

/// Ω for a path: attacker balances of s0 at step 0; per edge its Φ, exact
/// attacker accounting, nonnegative attacker balances, positive amounts and
/// paybacks covering their borrow; then the applicable clauses of `kb`.
smt::ConstraintSet path_constraints(const tfg::TokenFlowGraph& g, const sim::ChainState& s0,
                                    const std::vector<std::size_t>& path,
                                    const KnowledgeBase& kb = {});

/// False when some payback cannot close the innermost open loan.
bool stack_consistent(const std::vector<afl::Op>& ops);

std::vector<const tfg::Edge*> edges_of(const tfg::TokenFlowGraph& g,
                                       const std::vector<std::size_t>& path);

/// Edges leaving any node of `held`, by id.
std::vector<std::size_t> frontier(const tfg::TokenFlowGraph& g, const std::set<std::string>& held);

/// Resumable enumerator. The knowledge base is read on every call so clauses
/// learned between calls prune later probes.
class SketchSearch {
 public:
  SketchSearch(const tfg::TokenFlowGraph& g, const sim::ChainState& s0, const goal::Goal& psi,
               SketchBudget budget, solver::Session& session);

  /// Next sketch, or nullopt once the budget or the search space is spent.
  std::optional<afl::AttackSketch> next(const KnowledgeBase& kb = {});

  /// One line per probed edge: depth, edge, verdict.
  const std::vector<std::string>& trace() const { return trace_; }
  std::size_t yielded() const { return yielded_; }
  std::size_t probes() const { return probes_; }

 private:
  const tfg::TokenFlowGraph& g_;
  const sim::ChainState& s0_;
  std::set<std::string> targets_;
  SketchBudget budget_;
  solver::Session& session_;

  std::deque<SearchState> queue_;
  std::optional<SearchState> current_;
  std::vector<std::size_t> candidates_;
  std::size_t cursor_ = 0;
  std::set<std::string> seen_;
  std::vector<std::string> trace_;
  std::size_t yielded_ = 0;
  std::size_t probes_ = 0;
};

}  // namespace foray::sketch
