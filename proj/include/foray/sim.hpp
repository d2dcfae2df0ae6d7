#pragma once

// Concrete chain state and an interpreter for attack programs. A program runs
// as one transaction: any failing operation rolls everything back.

#include "foray/afl.hpp"
#include "foray/goal.hpp"
#include "foray/ledger.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace foray::sim {

/// Constant-product market. Reserves are the pool's own balances.
struct Pool {
  std::string id;
  std::string token_a;
  std::string token_b;
  Rational fee;  // fraction of the input kept by the pool

  bool operator==(const Pool&) const = default;
};

/// Flash lender. Liquidity is the lender's own balance of `token`.
struct Lender {
  std::string id;
  std::string token;
  Rational fee;  // interest as a fraction of the principal

  bool operator==(const Lender&) const = default;
};

/// Sells `sells` for `accepts` at a quoted rate: either the reserve ratio of
/// a pool (sells reserve / accepts reserve) or a fixed rate.
struct Bank {
  std::string id;
  std::string sells;
  std::string accepts;
  std::optional<std::string> quote_pool;
  Rational fixed_rate;

  bool operator==(const Bank&) const = default;
};

struct ChainState {
  Ledger balances;
  std::map<std::string, Pool> pools;
  std::map<std::string, Lender> lenders;
  std::map<std::string, Bank> banks;
  std::string attacker = "attacker";

  Rational balance(const std::string& token, const std::string& address) const {
    return balance_of(balances, token, address);
  }
  bool operator==(const ChainState&) const = default;
};

/// Parses the `.state` format. Throws SyntaxError or InvalidState.
ChainState load_state(std::string_view text);
std::string serialize_state(const ChainState& s);

struct Revert {
  std::string reason;  // InsufficientBalance, OpenLoan, MinOutNotMet, ...
  std::string detail;
  std::size_t op_index = 0;  // failing op; ops.size() for end-of-transaction checks

  bool operator==(const Revert&) const = default;
};

struct StepTrace {
  std::size_t index = 0;
  std::string op;  // rendering
  std::map<std::pair<std::string, std::string>, Rational> deltas;

  bool operator==(const StepTrace&) const = default;
};

struct ExecutionTrace {
  std::vector<StepTrace> steps;  // completed steps, plus nothing for the failing one
  std::optional<Revert> revert;

  bool operator==(const ExecutionTrace&) const = default;
};

struct Execution {
  ChainState state;  // s0 itself when reverted
  ExecutionTrace trace;

  bool reverted() const { return trace.revert.has_value(); }
};

/// Throws HoleInProgram when an amount is still a hole.
Execution execute(const std::vector<afl::Op>& ops, const ChainState& s0);
inline Execution execute(const afl::AttackProgram& p, const ChainState& s0) {
  return execute(p.ops, s0);
}

/// Output of a constant-product swap before flooring.
Rational pool_quote(const Rational& reserve_in, const Rational& reserve_out,
                    const Rational& amount_in, const Rational& fee);

struct Verdict {
  bool pass = false;
  std::string reason;  // empty on pass; revert reason or GoalNotMet
  ExecutionTrace trace;
  ChainState end;
};

Verdict validate(const afl::AttackProgram& p, const ChainState& s0, const goal::Goal& g);

bool eval_goal(const goal::Goal& g, const ChainState& start, const ChainState& end);

nlohmann::json to_json(const ExecutionTrace& t);
nlohmann::json to_json(const Verdict& v);

}  // namespace foray::sim
