#pragma once

// Compiles attack sketches to named constraints over step-indexed balances.
// Balance of token u at address a after t operations is `bal.<u>.<a>.<t>`;
// hole ◇k is `hk`.

#include "foray/afl.hpp"
#include "foray/goal.hpp"
#include "foray/sim.hpp"
#include "foray/smt.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace foray::cnstgen {

/// (R_u + x(1 - fee)) (R_v - y) = R_u R_v over the pool's balances.
struct ConstantProduct {
  std::string pool;
  std::string token_a;
  std::string token_b;
  Rational fee;
};

/// y = x · rate, where rate is a pool's sells/accepts reserve ratio or fixed.
struct LinearQuote {
  std::string bank;
  std::string sells;
  std::string accepts;
  std::optional<std::string> pool;
  Rational rate;
};

/// Payback y = x (1 + fee).
struct LoanTerms {
  std::string lender;
  std::string token;
  Rational fee;
};

struct MarketModel {
  std::map<std::string, ConstantProduct> pools;
  std::map<std::string, LinearQuote> banks;
  std::map<std::string, LoanTerms> lenders;
};

/// Market configuration taken from the chain state.
MarketModel market_model(const sim::ChainState& s0);

std::string balance_var(const std::string& token, const std::string& address, std::size_t t);

/// Tokens and addresses whose balances are tracked; every pair gets one
/// variable per step.
struct Universe {
  std::vector<std::string> tokens;
  std::vector<std::string> addresses;
};

Universe universe(const sim::ChainState& s0, const std::vector<afl::Op>& ops,
                  const goal::Goal& psi, const MarketModel& mm);

/// Atoms of op number t (0-based): balances move from step t to t + 1.
/// `principal` is the amount of the borrow a payback closes. Throws
/// MissingMarketModel.
smt::ConstraintSet compile_op(const afl::Op& op, std::size_t t, const MarketModel& mm,
                              const Universe& u, const std::string& attacker,
                              const std::optional<afl::Amount>& principal = std::nullopt);

smt::Expr amount_expr(const afl::Amount& a);

/// ψ with start balances at step 0 and end balances at step `steps`.
smt::Expr goal_expr(const goal::Goal& psi, std::size_t steps);

/// S₀ equalities, the fold of compile_op, ψ, then `kb` in order.
smt::ConstraintSet compile_sketch(const sim::ChainState& s0, const afl::AttackSketch& sk,
                                  const goal::Goal& psi, const std::vector<smt::NamedAtom>& kb,
                                  const MarketModel& mm);

}  // namespace foray::cnstgen
