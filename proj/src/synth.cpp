#include "foray/synth.hpp"

#include "foray/error.hpp"
#include "foray/tfg.hpp"

#include <nlohmann/json.hpp>

#include <chrono>

namespace foray::synth {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Model holes_only(const afl::AttackSketch& sk, const Model& m, std::size_t upto) {
  Model out;
  for (std::size_t i = 0; i < sk.ops.size() && i <= upto; ++i) {
    for (const auto& h : sk.ops[i].holes()) {
      auto it = m.find(h.smt_name());
      out[h.smt_name()] = it == m.end() ? Rational(0) : it->second;
    }
  }
  return out;
}

std::string model_text(const Model& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + format_rational(v) + ";";
  return out;
}

// Largest magnitude among the hole values, used to scale ε_b.
Rational magnitude(const Model& m) {
  Rational best = 0;
  for (const auto& [k, v] : m) best = std::max(best, v < 0 ? Rational(-v) : v);
  return best;
}

std::map<std::string, Rational> attacker_profit(const sim::ChainState& s0, const sim::ChainState& end) {
  std::set<std::string> tokens;
  for (const auto& [key, v] : s0.balances) tokens.insert(key.first);
  for (const auto& [key, v] : end.balances) tokens.insert(key.first);
  std::map<std::string, Rational> out;
  for (const auto& t : tokens) {
    Rational d = end.balance(t, end.attacker) - s0.balance(t, s0.attacker);
    if (d != 0) out[t] = d;
  }
  return out;
}

}  // namespace

Clause learn_conflict(const afl::AttackSketch& sk, const Model& model,
                      const std::optional<sim::Verdict>& verdict, const Rational& radius,
                      std::string name) {
  Clause c;
  c.name = std::move(name);
  const sim::Revert* revert = verdict && verdict->trace.revert ? &*verdict->trace.revert : nullptr;
  std::size_t upto = sk.ops.empty() ? 0 : sk.ops.size() - 1;
  if (revert && revert->op_index < sk.ops.size()) {
    upto = revert->op_index;
    c.prefix.assign(sk.source_path.begin(), sk.source_path.begin() + static_cast<long>(upto + 1));
    c.exact = false;
  } else {
    c.prefix = sk.source_path;
    c.exact = true;
  }
  Model blocked = holes_only(sk, model, upto);
  if (blocked.empty()) throw Error("InvariantViolation", c.name, "nothing to block");
  c.formula = solver::blocking_clause(blocked, radius);
  c.model_hash = solver::content_hash(model_text(blocked));
  c.reason = verdict ? (verdict->reason.empty() ? "pass" : verdict->reason) : "Incomplete";
  return c;
}

SynthesisReport synthesize(const ir::ProtocolIR& p, const sim::ChainState& s0,
                           const std::vector<goal::Goal>& goals, const SynthBudget& budget,
                           solver::Session& session) {
  if (budget.models_per_sketch == 0 || budget.solve_timeout_ms <= 0 || budget.radius_patience == 0) {
    throw Error("InvalidBudget", "synth", "budgets must be positive");
  }
  if (p.attacker != s0.attacker) {
    throw Error("InvalidState", s0.attacker, "state attacker differs from protocol attacker " + p.attacker);
  }
  auto t_start = Clock::now();
  SynthesisReport report;
  const tfg::TokenFlowGraph g = tfg::build_tfg(p);
  const cnstgen::MarketModel mm = cnstgen::market_model(s0);

  for (const auto& psi : goals) {
    GoalRun run;
    run.goal = goal::render(psi);
    KnowledgeBase kb;
    sketch::SketchSearch search(g, s0, psi, budget.sketch, session);
    std::size_t sketch_index = 0;

    while (auto sk = search.next(kb)) {
      ++report.sketches_tried;
      SketchRecord rec;
      rec.index = sketch_index++;
      rec.path = sk->source_path;
      rec.sketch = afl::render(*sk);
      rec.outcome = "budget";

      Rational radius = budget.initial_radius;
      std::string last_failure;
      std::size_t repeats = 0;

      for (std::size_t attempt = 0; attempt < budget.models_per_sketch; ++attempt) {
        smt::ConstraintSet cs =
            cnstgen::compile_sketch(s0, *sk, psi, applicable(kb, sk->source_path), mm);
        if (attempt == 0) {
          rec.atoms = cs.atoms.size();
          for (const auto& a : cs.atoms) {
            if (a.partition != "kb") ++rec.partitions[a.partition];
          }
        }
        solver::Result r = session.check(cs, budget.solve_timeout_ms);
        if (r.status == solver::Status::Unsat) {
          rec.outcome = "unsat";
          rec.core.assign(r.core.begin(), r.core.end());
          break;
        }
        if (r.status == solver::Status::Unknown) {
          rec.outcome = "unknown";
          break;
        }
        ++report.models_tried;

        ModelRecord mrec;
        std::optional<afl::AttackProgram> prog;
        std::optional<sim::Verdict> verdict;
        try {
          prog = afl::complete(*sk, r.model);
        } catch (const Error& e) {
          mrec.outcome = e.code();
        }
        if (prog) {
          mrec.program = afl::render(*prog);
          auto t_sim = Clock::now();
          verdict = sim::validate(*prog, s0, psi);
          report.sim_ms += ms_since(t_sim);
          mrec.outcome = verdict->pass ? "pass" : verdict->reason;
        }
        mrec.model_hash = solver::content_hash(model_text(holes_only(*sk, r.model, sk->ops.size())));

        if (verdict && verdict->pass) {
          // Final gate: the program must validate again from scratch.
          sim::Verdict again = sim::validate(*prog, s0, psi);
          if (!again.pass) throw Error("InvariantViolation", "validate", "program failed re-validation");
          rec.models.push_back(mrec);
          rec.outcome = "found";
          run.sketches.push_back(rec);
          run.found = true;
          report.found = true;
          report.program = *prog;
          report.goal = run.goal;
          report.profit = attacker_profit(s0, again.end);
          report.verdict = std::move(again);
          break;
        }

        std::string failure = mrec.outcome;
        if (verdict && verdict->trace.revert) failure += "@" + std::to_string(verdict->trace.revert->op_index);
        repeats = failure == last_failure ? repeats + 1 : 0;
        last_failure = failure;
        if (repeats + 1 >= budget.radius_patience) {
          Rational floor_step = magnitude(r.model) / 1024;
          radius = std::max(Rational(radius * 2), std::max(floor_step, Rational(1)));
        }
        Clause c = learn_conflict(*sk, r.model, verdict, radius, "kb" + std::to_string(kb.size()));
        c.sketch = rec.index;
        mrec.clause = c.name;
        kb.push_back(std::move(c));
        rec.models.push_back(std::move(mrec));
      }
      if (run.found) break;
      run.sketches.push_back(std::move(rec));
    }
    run.probe_trace = search.trace();
    run.probes = search.probes();
    run.kb_size = kb.size();
    report.kb = kb;
    report.runs.push_back(std::move(run));
    if (report.found) break;
  }
  report.solver_stats = session.stats();
  report.total_ms = ms_since(t_start);
  return report;
}

nlohmann::json to_json(const SynthesisReport& r, bool timing) {
  using nlohmann::json;
  json out;
  out["outcome"] = r.found ? "attack" : "exhausted";
  out["goal"] = r.found ? json(r.goal) : json(nullptr);
  if (r.program) {
    std::vector<std::string> lines;
    for (const auto& op : r.program->ops) lines.push_back(afl::render(op));
    out["program"] = lines;
    json binding = json::object();
    for (const auto& [h, v] : r.program->binding) binding[h.display()] = format_rational(v);
    out["binding"] = binding;
  } else {
    out["program"] = nullptr;
  }
  json profit = json::object();
  for (const auto& [t, v] : r.profit) profit[t] = format_rational(v);
  out["profit"] = profit;
  out["verdict"] = r.verdict ? sim::to_json(*r.verdict) : json(nullptr);

  json runs = json::array();
  for (const auto& run : r.runs) {
    json sketches = json::array();
    for (const auto& s : run.sketches) {
      json models = json::array();
      for (const auto& m : s.models) {
        models.push_back({{"model", m.model_hash},
                          {"program", m.program},
                          {"outcome", m.outcome},
                          {"clause", m.clause}});
      }
      sketches.push_back({{"index", s.index},
                          {"path", s.path},
                          {"sketch", s.sketch},
                          {"atoms", s.atoms},
                          {"partitions", s.partitions},
                          {"outcome", s.outcome},
                          {"core", s.core},
                          {"models", models}});
    }
    runs.push_back({{"goal", run.goal},
                    {"found", run.found},
                    {"probes", run.probes},
                    {"kb_size", run.kb_size},
                    {"sketches", sketches},
                    {"probe_trace", run.probe_trace}});
  }
  out["runs"] = runs;

  json kb = json::array();
  for (const auto& c : r.kb) {
    kb.push_back({{"name", c.name},
                  {"formula", smt::to_smtlib(c.formula)},
                  {"prefix", c.prefix},
                  {"exact", c.exact},
                  {"sketch", c.sketch},
                  {"model", c.model_hash},
                  {"reason", c.reason}});
  }
  out["kb"] = kb;
  out["statistics"] = {{"sketches_tried", r.sketches_tried},
                       {"models_tried", r.models_tried},
                       {"kb_size", r.kb.size()},
                       {"solver_queries", r.solver_stats.queries},
                       {"sat", r.solver_stats.sat},
                       {"unsat", r.solver_stats.unsat},
                       {"unknown", r.solver_stats.unknown}};
  if (timing) {
    out["timing"] = {{"solver_ms", r.solver_stats.wall_ms},
                     {"sim_ms", r.sim_ms},
                     {"total_ms", r.total_ms},
                     {"replayed", r.solver_stats.replayed},
                     {"restarts", r.solver_stats.restarts}};
  }
  return out;
}

}  // namespace foray::synth
