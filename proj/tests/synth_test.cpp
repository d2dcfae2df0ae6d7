#include "foray/error.hpp"
#include "foray/synth.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace foray;
using namespace foray::synth;
using afl::OpKind;

namespace {

struct Run {
  ir::ProtocolIR p;
  sim::ChainState s0;
  SynthesisReport report;
};

Run synth_fixture(const std::string& protocol, const std::string& state,
                  std::optional<std::string> goal_text = std::nullopt) {
  Run r;
  r.p = support::load_protocol(protocol);
  r.s0 = support::load_state(state);
  std::vector<goal::Goal> goals = goal_text ? std::vector<goal::Goal>{goal::resolve(goal::parse_goal(*goal_text), r.p)}
                                            : goal::generate_goals(r.p);
  auto session = support::fixture_session();
  r.report = synthesize(r.p, r.s0, goals, SynthBudget{}, *session);
  return r;
}

afl::AttackSketch mumug_sketch(const tfg::TokenFlowGraph& g) {
  return afl::sketch_from_path({&g.edges[0], &g.edges[3], &g.edges[2], &g.edges[1]});
}

std::set<std::string> vars(const Clause& c) { return smt::variables(c.formula); }

}  // namespace

TEST(Synthesize, MumugAttack) {
  auto run = synth_fixture("mumug.ir", "mumug.state");
  const auto& r = run.report;
  ASSERT_TRUE(r.found);
  ASSERT_TRUE(r.program);
  std::vector<OpKind> kinds;
  for (const auto& op : r.program->ops) kinds.push_back(op.kind);
  EXPECT_EQ(kinds, (std::vector<OpKind>{OpKind::Borrow, OpKind::Swap, OpKind::Swap, OpKind::Payback}));
  EXPECT_GT(r.profit.at("USDCe"), 0);

  auto v = sim::validate(*r.program, run.s0, goal::profit_goal("USDCe", "attacker"));
  EXPECT_TRUE(v.pass) << v.reason;
  EXPECT_EQ(v.end.balance("USDCe", "attacker") - run.s0.balance("USDCe", "attacker"), r.profit.at("USDCe"));
}

TEST(Synthesize, UnsatisfiableGoal) {
  auto run = synth_fixture("mumug.ir", "mumug.state", "0 < 0");
  const auto& r = run.report;
  EXPECT_FALSE(r.found);
  EXPECT_FALSE(r.program);
  EXPECT_GT(r.sketches_tried, 0u);
  EXPECT_EQ(r.models_tried, 0u);
  for (const auto& sk : r.runs.at(0).sketches) {
    EXPECT_EQ(sk.outcome, "unsat") << sk.sketch;
    EXPECT_NE(std::find(sk.core.begin(), sk.core.end(), "goal"), sk.core.end());
  }
}

TEST(Synthesize, PatchedBankHasNoAttack) {
  auto run = synth_fixture("mumug_patched.ir", "mumug_patched.state");
  const auto& r = run.report;
  EXPECT_FALSE(r.found);
  EXPECT_FALSE(r.program);
  EXPECT_GT(r.sketches_tried, 0u);
  // Within one sketch no model is proposed twice.
  for (const auto& sk : r.runs.at(0).sketches) {
    std::set<std::string> hashes;
    for (const auto& m : sk.models) EXPECT_TRUE(hashes.insert(m.model_hash).second) << sk.sketch;
  }
  for (std::size_t i = 0; i < r.kb.size(); ++i) EXPECT_EQ(r.kb[i].name, "kb" + std::to_string(i));
}

TEST(Synthesize, Deterministic) {
  auto a = synth_fixture("mumug.ir", "mumug.state");
  auto b = synth_fixture("mumug.ir", "mumug.state");
  EXPECT_EQ(to_json(a.report, false).dump(), to_json(b.report, false).dump());
  EXPECT_FALSE(to_json(a.report, false).contains("timing"));
  EXPECT_TRUE(to_json(a.report, true).contains("timing"));
}

TEST(Synthesize, AttackerMismatch) {
  auto p = support::load_protocol("mumug.ir");
  auto s0 = support::load_state("mumug.state");
  s0.attacker = "someone";
  auto session = support::fixture_session();
  try {
    synthesize(p, s0, goal::generate_goals(p), SynthBudget{}, *session);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "InvalidState");
  }
}

TEST(LearnConflict, RevertBlocksPrefix) {
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto psi = goal::generate_goals(p)[0];
  auto sk = mumug_sketch(g);
  // The pair swap asks for more than the pool can pay.
  Model m{{"h1", 1000}, {"h2", 1000}, {"h3", 999}, {"h4", 10}, {"h5", 1}, {"h6", 1000}};
  auto v = sim::validate(afl::complete(sk, m), s0, psi);
  ASSERT_EQ(v.reason, "MinOutNotMet");
  ASSERT_EQ(v.trace.revert->op_index, 1u);

  Clause c = learn_conflict(sk, m, v, 0, "kb0");
  EXPECT_EQ(vars(c), (std::set<std::string>{"h1", "h2", "h3"}));
  EXPECT_EQ(c.prefix, (std::vector<std::size_t>{0, 3}));
  EXPECT_FALSE(c.exact);
  EXPECT_FALSE(smt::eval_bool(c.formula, m));
  EXPECT_TRUE(c.applies_to({0, 3, 4, 1}));
  EXPECT_FALSE(c.applies_to({0, 2, 3, 1}));

  // Oracle: whatever the later holes are, the program still fails at op 2.
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    Model other = m;
    for (auto h : {"h4", "h5", "h6"}) other[h] = static_cast<long>(rng() % 5000000);
    auto w = sim::validate(afl::complete(sk, other), s0, psi);
    ASSERT_EQ(w.reason, "MinOutNotMet");
    ASSERT_EQ(w.trace.revert->op_index, 1u);
  }
}

TEST(LearnConflict, GoalMissBlocksWholeModel) {
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto psi = goal::generate_goals(p)[0];
  auto sk = mumug_sketch(g);
  Model m{{"h1", 1000}, {"h2", 0}, {"h3", 0}, {"h4", 0}, {"h5", 0}, {"h6", 1000}};
  auto v = sim::validate(afl::complete(sk, m), s0, psi);
  ASSERT_EQ(v.reason, "GoalNotMet");

  Clause c = learn_conflict(sk, m, v, 0, "kb3");
  EXPECT_EQ(vars(c), (std::set<std::string>{"h1", "h2", "h3", "h4", "h5", "h6"}));
  EXPECT_TRUE(c.exact);
  EXPECT_EQ(c.prefix, sk.source_path);
  EXPECT_EQ(c.reason, "GoalNotMet");
  EXPECT_FALSE(smt::eval_bool(c.formula, m));
}

TEST(LearnConflict, RadiusWidensBlock) {
  auto g = tfg::build_tfg(support::load_protocol("mumug.ir"));
  auto sk = mumug_sketch(g);
  Model m{{"h1", 1000}, {"h2", 1000}, {"h3", 0}, {"h4", 0}, {"h5", 0}, {"h6", 1000}};
  Clause c = learn_conflict(sk, m, std::nullopt, 4, "kb0");
  Model near = m;
  near["h1"] = 1003;
  near["h4"] = 2;
  EXPECT_FALSE(smt::eval_bool(c.formula, near));
  near["h4"] = 5;
  EXPECT_TRUE(smt::eval_bool(c.formula, near));
  EXPECT_EQ(c.reason, "Incomplete");
}
