#include "foray/cnstgen.hpp"
#include "foray/error.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>

#include <random>
#include <regex>

using namespace foray;
using namespace foray::cnstgen;
using afl::Op;
using afl::OpKind;
using smt::Expr;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

afl::AttackSketch sketch_of(const std::string& text) {
  afl::AttackSketch sk;
  sk.ops = afl::parse_ops(text);
  for (const auto& op : sk.ops) {
    for (const auto& h : op.holes()) sk.holes.insert(h);
  }
  return sk;
}

goal::Goal always() { return goal::parse_goal("0 < 1"); }

std::vector<std::string> dump(const smt::ConstraintSet& cs) {
  std::vector<std::string> out;
  for (const auto& a : cs.atoms) out.push_back(a.name + " " + smt::to_smtlib(a.formula));
  return out;
}

std::vector<const tfg::Edge*> random_mumug_path(std::mt19937_64& rng, const tfg::TokenFlowGraph& g) {
  while (true) {
    std::vector<const tfg::Edge*> path;
    int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) path.push_back(&g.edges[rng() % g.edges.size()]);
    int next = 1;
    if (afl::loans_paired(afl::ops_from_path(path, next))) return path;
  }
}

afl::AttackSketch random_transfer_sketch(std::mt19937_64& rng) {
  static const char* who[] = {"attacker", "b", "c"};
  std::string text;
  int n = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n; ++i) {
    text += std::string("transfer(token: ") + (rng() % 2 ? "A" : "B") + ", from: " + who[rng() % 3] +
            ", to: " + who[rng() % 3] + ", amt: ◇" + std::to_string(i + 1) + ")\n";
  }
  return sketch_of(text);
}

}  // namespace

TEST(CompileOp, TransferExample) {
  auto s0 = sim::load_state("attacker attacker\nbalance USDCe attacker 10\nbalance USDCe bank 5\n");
  auto sk = sketch_of("transfer(token: USDCe, from: attacker, to: bank, amt: ◇1)\n");
  auto cs = compile_sketch(s0, sk, always(), {}, market_model(s0));
  EXPECT_EQ(dump(cs), (std::vector<std::string>{
                          "init.USDCe.attacker (= bal.USDCe.attacker.0 10.0)",
                          "init.USDCe.bank (= bal.USDCe.bank.0 5.0)",
                          "step1.hole.h1 (>= h1 0.0)",
                          "step1.bal.USDCe.attacker (= bal.USDCe.attacker.1 (- bal.USDCe.attacker.0 h1))",
                          "step1.bal.USDCe.bank (= bal.USDCe.bank.1 (+ bal.USDCe.bank.0 h1))",
                          "step1.nonneg.USDCe.attacker (>= bal.USDCe.attacker.1 0.0)",
                          "step1.nonneg.USDCe.bank (>= bal.USDCe.bank.1 0.0)",
                          "goal (< 0.0 1.0)",
                      }));
}

TEST(CompileOp, FeeFreeSwapKeepsProduct) {
  auto s0 = sim::load_state("pool P A B fee 0\nbalance A P 1000\nbalance B P 1000\n");
  auto sk = sketch_of("swap(market: P, src: A, tgt: B, in: ◇1, minout: ◇2, to: attacker)\n");
  auto cs = compile_sketch(s0, sk, always(), {}, market_model(s0));
  const auto* rho = cs.atom("step1.rho");
  ASSERT_TRUE(rho);
  // Constant-product oracle: y = R_v x / (R_u + x).
  std::mt19937_64 rng(17);
  for (int c = 0; c < 200; ++c) {
    Rational ru = 1 + static_cast<long>(rng() % 5000), rv = 1 + static_cast<long>(rng() % 5000);
    Rational x = static_cast<long>(rng() % 5000);
    Rational y = rv * x / (ru + x);
    Model m{{"bal.A.P.0", ru}, {"bal.B.P.0", rv}, {"h1", x}, {"h2", y}};
    ASSERT_TRUE(smt::eval_bool(rho->formula, m));
    m["h2"] = y + Rational(1, 3);
    ASSERT_FALSE(smt::eval_bool(rho->formula, m));
    // Post reserves keep the product.
    EXPECT_EQ((ru + x) * (rv - y), ru * rv);
  }
}

TEST(CompileOp, FeeFreePayback) {
  auto s0 = sim::load_state("lender L MU fee 0\nbalance MU L 100\n");
  auto sk = sketch_of("borrow(lender: L, token: MU, amt: ◇1)\npayback(lender: L, token: MU, amt: ◇2)\n");
  auto cs = compile_sketch(s0, sk, always(), {}, market_model(s0));
  EXPECT_EQ(smt::to_smtlib(cs.atom("step2.theta")->formula), "(= h2 h1)");
}

TEST(CompileOp, PaybackInterest) {
  auto s0 = sim::load_state("lender L MU fee 1/20\nbalance MU L 100\n");
  auto sk = sketch_of("borrow(lender: L, token: MU, amt: ◇1)\npayback(lender: L, token: MU, amt: ◇2)\n");
  auto theta = compile_sketch(s0, sk, always(), {}, market_model(s0)).atom("step2.theta")->formula;
  EXPECT_TRUE(smt::eval_bool(theta, {{"h1", 40}, {"h2", 42}}));
  EXPECT_FALSE(smt::eval_bool(theta, {{"h1", 40}, {"h2", 40}}));
}

TEST(CompileOp, MissingMarketModel) {
  auto s0 = sim::load_state("pool P A B fee 0\n");
  auto mm = market_model(s0);
  EXPECT_EQ(error_code([&] {
              compile_sketch(s0, sketch_of("swap(market: Q, src: A, tgt: B, in: ◇1, minout: ◇2, to: a)"),
                             always(), {}, mm);
            }),
            "MissingMarketModel");
  EXPECT_EQ(error_code([&] {
              compile_sketch(s0, sketch_of("borrow(lender: L, token: A, amt: ◇1)\npayback(lender: L, token: A, amt: ◇2)"),
                             always(), {}, mm);
            }),
            "MissingMarketModel");
}

TEST(CompileSketch, EmptySketch) {
  auto s0 = support::load_state("mumug.state");
  auto psi = goal::profit_goal("USDCe", "attacker");
  auto cs = compile_sketch(s0, afl::AttackSketch{}, psi, {}, market_model(s0));
  for (const auto& a : cs.atoms) EXPECT_TRUE(a.partition == "init" || a.partition == "goal") << a.name;
  EXPECT_EQ(cs.count("goal"), 1u);
  EXPECT_EQ(smt::to_smtlib(cs.atom("goal")->formula),
            "(< 0.0 (- bal.USDCe.attacker.0 bal.USDCe.attacker.0))");
}

TEST(CompileSketch, KnowledgeBaseAppended) {
  auto s0 = support::load_state("mumug.state");
  auto sk = sketch_of("transfer(token: MU, from: attacker, to: Pair, amt: ◇1)");
  auto cs = compile_sketch(s0, sk, always(), {{"kb0", "kb", smt::gt(smt::var("h1"), smt::num(3))}},
                           market_model(s0));
  EXPECT_EQ(cs.atoms.back().name, "kb0");
  EXPECT_EQ(cs.count("kb"), 1u);
}

TEST(CompileSketch, MumugAtomCount) {
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto sk = afl::sketch_from_path({&g.edges[0], &g.edges[3], &g.edges[2], &g.edges[1]});
  auto cs = compile_sketch(s0, sk, goal::generate_goals(p)[0], {}, market_model(s0));
  EXPECT_EQ(cs.atoms.size(), 82u);
  EXPECT_LE(cs.atoms.size(), 300u);
}

TEST(CompileSketch, TautologyIsSat) {
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto sk = afl::sketch_from_path({&g.edges[0], &g.edges[3], &g.edges[2], &g.edges[1]});
  auto psi = goal::parse_goal("balance(MU, attacker, start) = balance(MU, attacker, start)");
  auto session = support::session("cnstgen");
  auto r = session->check(compile_sketch(s0, sk, psi, {}, market_model(s0)));
  EXPECT_EQ(r.status, solver::Status::Sat);
}

TEST(Property, TelescopingConservation) {
  std::mt19937_64 rng(201);
  auto s0 = sim::load_state("attacker attacker\nbalance A attacker 7\nbalance B c 3\n");
  auto mm = market_model(s0);
  for (int c = 0; c < 1000; ++c) {
    auto sk = random_transfer_sketch(rng);
    auto cs = compile_sketch(s0, sk, always(), {}, mm);
    auto u = universe(s0, sk.ops, always(), mm);
    // Balance updates are linear, so agreeing on random points means Σ_a u_{t+1}[a] = Σ_a u_t[a].
    Model m;
    for (const auto& h : sk.holes) m[h.smt_name()] = static_cast<long>(rng() % 100);
    for (const auto& tok : u.tokens) {
      for (const auto& a : u.addresses) m[balance_var(tok, a, 0)] = static_cast<long>(rng() % 100);
    }
    for (std::size_t t = 1; t <= sk.ops.size(); ++t) {
      for (const auto& tok : u.tokens) {
        Rational before = 0, after = 0;
        for (const auto& a : u.addresses) {
          const auto* atom = cs.atom("step" + std::to_string(t) + ".bal." + tok + "." + a);
          ASSERT_TRUE(atom);
          ASSERT_EQ(atom->formula.kind, Expr::Kind::Eq);
          ASSERT_EQ(atom->formula.args[0].name, balance_var(tok, a, t));
          Rational v = smt::eval_arith(atom->formula.args[1], m);
          m[balance_var(tok, a, t)] = v;
          before += m.at(balance_var(tok, a, t - 1));
          after += v;
        }
        ASSERT_EQ(before, after) << "case " << c << " step " << t;
      }
    }
  }
}

TEST(Property, HolesCoveredAndVariablesHoused) {
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto mm = market_model(s0);
  auto psi = goal::generate_goals(p)[0];
  std::mt19937_64 rng(203);
  std::regex hole("h[0-9]+"), bal(R"(bal\.([^.]+)\.([^.]+)\.([0-9]+))");
  for (int c = 0; c < 1000; ++c) {
    auto sk = afl::sketch_from_path(random_mumug_path(rng, g));
    auto cs = compile_sketch(s0, sk, psi, {}, mm);
    auto u = universe(s0, sk.ops, psi, mm);
    std::set<std::string> names, used;
    for (const auto& a : cs.atoms) {
      ASSERT_TRUE(names.insert(a.name).second) << a.name;
      if (a.name.find(".hole.") != std::string::npos) continue;
      for (const auto& v : smt::variables(a.formula)) used.insert(v);
    }
    for (const auto& h : sk.holes) ASSERT_TRUE(used.contains(h.smt_name())) << h.display();
    for (const auto& v : used) {
      std::smatch m;
      if (std::regex_match(v, hole)) continue;
      ASSERT_TRUE(std::regex_match(v, m, bal)) << v;
      ASSERT_NE(std::find(u.tokens.begin(), u.tokens.end(), m[1].str()), u.tokens.end()) << v;
      ASSERT_NE(std::find(u.addresses.begin(), u.addresses.end(), m[2].str()), u.addresses.end()) << v;
      ASSERT_LE(std::stoul(m[3].str()), sk.ops.size()) << v;
    }
  }
}

TEST(Property, SimulatorSatisfiesConstraints) {
  // Concrete programs whose swaps lose nothing to flooring.
  std::mt19937_64 rng(207);
  static const Rational fees[] = {0, Rational(1, 2), Rational(1, 10)};
  int checked = 0;
  for (int c = 0; checked < 1000 && c < 200000; ++c) {
    sim::ChainState s0;
    s0.attacker = "a";
    s0.pools["P"] = sim::Pool{"P", "A", "B", fees[rng() % 3]};
    s0.lenders["L"] = sim::Lender{"L", "A", fees[rng() % 3]};
    s0.banks["K"] = sim::Bank{"K", "A", "B", std::string("P"), 0};
    s0.balances[{"A", "P"}] = 10 * (1 + static_cast<long>(rng() % 20));
    s0.balances[{"B", "P"}] = 10 * (1 + static_cast<long>(rng() % 20));
    s0.balances[{"A", "L"}] = 1000;
    s0.balances[{"A", "K"}] = 1000;
    s0.balances[{"B", "a"}] = static_cast<long>(rng() % 50);
    sim::ChainState cur = s0;

    std::vector<Op> ops;
    bool lossless = true;
    auto add_swap = [&](const std::string& market, const std::string& src, const std::string& tgt) {
      Rational x = static_cast<long>(rng() % 60);
      Rational y;
      if (market == "P") {
        y = sim::pool_quote(cur.balance(src, "P"), cur.balance(tgt, "P"), x, s0.pools["P"].fee);
      } else {
        y = x * cur.balance("A", "P") / cur.balance("B", "P");
      }
      if (y != floor_rational(y)) lossless = false;
      Op op;
      op.kind = OpKind::Swap;
      op.market = market;
      op.src_token = src;
      op.tgt_token = tgt;
      op.amount = x;
      op.min_out = y;
      op.to = "a";
      ops.push_back(op);
    };
    Rational principal = 10 * static_cast<long>(rng() % 10);
    bool with_loan = rng() % 2;
    if (with_loan) {
      Op b;
      b.kind = OpKind::Borrow;
      b.market = "L";
      b.token = "A";
      b.amount = principal;
      ops.push_back(b);
    }
    int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n && lossless; ++i) {
      switch (rng() % 4) {
        case 0: add_swap("P", "A", "B"); break;
        case 1: add_swap("P", "B", "A"); break;
        case 2: add_swap("K", "B", "A"); break;
        default: {
          Op t;
          t.kind = OpKind::Transfer;
          t.token = rng() % 2 ? "A" : "B";
          t.from = "a";
          t.to = "c";
          t.amount = static_cast<long>(rng() % 5);
          ops.push_back(t);
        }
      }
      auto prefix = sim::execute(ops, s0);
      if (prefix.reverted() && prefix.trace.revert->reason != "OpenLoan") lossless = false;
      if (lossless) {
        cur = s0;
        for (const auto& step : prefix.trace.steps) {
          for (const auto& [key, d] : step.deltas) cur.balances[key] += d;
        }
      }
    }
    if (!lossless) continue;
    if (with_loan) {
      Op pb;
      pb.kind = OpKind::Payback;
      pb.market = "L";
      pb.token = "A";
      pb.amount = Rational(principal * (1 + s0.lenders["L"].fee));
      ops.push_back(pb);
    }
    auto run = sim::execute(ops, s0);
    if (run.reverted()) continue;
    ++checked;

    afl::AttackSketch sk;
    sk.ops = ops;
    auto mm = market_model(s0);
    auto cs = compile_sketch(s0, sk, always(), {}, mm);
    auto u = universe(s0, ops, always(), mm);
    Model m;
    sim::ChainState st = s0;
    for (std::size_t t = 0; t <= ops.size(); ++t) {
      if (t > 0) {
        for (const auto& [key, d] : run.trace.steps[t - 1].deltas) st.balances[key] += d;
      }
      for (const auto& tok : u.tokens) {
        for (const auto& a : u.addresses) m[balance_var(tok, a, t)] = st.balance(tok, a);
      }
    }
    for (const auto& a : cs.atoms) {
      ASSERT_TRUE(smt::eval_bool(a.formula, m)) << "case " << c << ": " << a.name << " "
                                                << smt::to_smtlib(a.formula);
    }
  }
  EXPECT_EQ(checked, 1000);
}
