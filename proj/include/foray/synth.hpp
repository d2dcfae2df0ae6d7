#pragma once

// Counterexample-guided synthesis: enumerate sketches, solve their
// constraints for hole values, validate the completed program in the
// simulator, and learn a clause from every failure.

#include "foray/afl.hpp"
#include "foray/cnstgen.hpp"
#include "foray/goal.hpp"
#include "foray/knowledge.hpp"
#include "foray/sim.hpp"
#include "foray/sketch.hpp"
#include "foray/solver.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace foray::synth {

struct SynthBudget {
  sketch::SketchBudget sketch;        // max_sketches is the global sketch budget
  std::size_t models_per_sketch = 16;
  int solve_timeout_ms = 5000;
  Rational initial_radius = 0;        // blocking radius ε_b
  /// Consecutive failures at the same point before ε_b grows.
  std::size_t radius_patience = 2;
};

struct ModelRecord {
  std::string model_hash;
  std::string program;  // rendering of the completed program, if any
  std::string outcome;  // pass, or the failure reason
  std::string clause;   // learned clause name
};

struct SketchRecord {
  std::size_t index = 0;
  std::vector<std::size_t> path;
  std::string sketch;
  std::size_t atoms = 0;
  std::map<std::string, std::size_t> partitions;  // atom count per partition
  std::string outcome;  // found, unsat, unknown, budget
  std::vector<std::string> core;  // unsat core, when unsat
  std::vector<ModelRecord> models;
};

struct GoalRun {
  std::string goal;
  bool found = false;
  std::vector<SketchRecord> sketches;
  std::vector<std::string> probe_trace;
  std::size_t probes = 0;
  std::size_t kb_size = 0;
};

struct SynthesisReport {
  bool found = false;
  std::optional<afl::AttackProgram> program;
  std::string goal;  // the goal that succeeded
  std::optional<sim::Verdict> verdict;
  std::map<std::string, Rational> profit;  // attacker end - start per token
  std::vector<GoalRun> runs;
  KnowledgeBase kb;  // clauses of the last goal run

  std::size_t sketches_tried = 0;
  std::size_t models_tried = 0;
  solver::Stats solver_stats;
  double sim_ms = 0;
  double total_ms = 0;
};

/// Clause for a failed validation of `program` (completed from `model` on
/// `sk`). A revert at op k blocks the holes of ops up to k around their model
/// values and applies to every path sharing those edges; any other failure
/// blocks all holes of this exact path.
Clause learn_conflict(const afl::AttackSketch& sk, const Model& model,
                      const std::optional<sim::Verdict>& verdict, const Rational& radius,
                      std::string name);

/// Tries each goal in order; the first validated program wins.
SynthesisReport synthesize(const ir::ProtocolIR& p, const sim::ChainState& s0,
                           const std::vector<goal::Goal>& goals, const SynthBudget& budget,
                           solver::Session& session);

/// `timing` adds wall-clock figures, which vary between runs.
nlohmann::json to_json(const SynthesisReport& r, bool timing = true);

}  // namespace foray::synth
