#pragma once

// Attack goals: quantifier-free comparisons over attacker-visible balances
// at the start and end of the attack.

#include "foray/ir.hpp"
#include "foray/ledger.hpp"

#include <set>
#include <string>
#include <vector>

namespace foray::goal {

enum class Epoch { Start, End };

struct BalanceRef {
  std::string token;
  std::string address;
  Epoch epoch = Epoch::End;

  bool operator==(const BalanceRef&) const = default;
};

struct Term {
  enum class Kind { Const, Balance, Add, Sub, Mul };
  Kind kind = Kind::Const;
  Rational value;
  BalanceRef ref;
  std::vector<Term> operands;  // two for Add/Sub/Mul

  static Term constant(Rational v);
  static Term balance(BalanceRef r);
  static Term binary(Kind k, Term l, Term r);

  bool operator==(const Term&) const = default;
};

enum class Cmp { Eq, Ge, Lt };

struct Formula {
  enum class Kind { Atom, Not, And };
  Kind kind = Kind::Atom;
  Cmp cmp = Cmp::Eq;
  Term lhs, rhs;                  // Atom
  std::vector<Formula> children;  // Not: one, And: two or more

  static Formula atom(Term l, Cmp c, Term r);
  static Formula negate(Formula f);
  static Formula conjoin(std::vector<Formula> fs);

  bool operator==(const Formula&) const = default;
};

struct Goal {
  Formula formula;
  std::string source;  // text it was parsed from, or the rendering

  bool operator==(const Goal& o) const { return formula == o.formula; }
};

/// Throws SyntaxError or QuantifiedGoalRejected.
Goal parse_goal(std::string_view text);

/// Canonical text; parse_goal(render(g)) == g.
std::string render(const Goal& g);
std::string render(const Formula& f);
std::string render(const Term& t);

/// Matches token names case-insensitively against declarations and rewrites
/// them to the declared spelling; `attacker` becomes the protocol attacker.
/// Throws UndeclaredToken.
Goal resolve(const Goal& g, const ir::ProtocolIR& p);

/// One Eq.-(1)-shaped profit goal per stablecoin, in declaration order.
std::vector<Goal> generate_goals(const ir::ProtocolIR& p);

/// Goal requiring the attacker's end balance of `token` to exceed the start.
Goal profit_goal(const std::string& token, const std::string& attacker);

std::set<std::string> target_tokens(const Goal& g);

/// Every balance reference in the goal.
std::vector<BalanceRef> balance_refs(const Goal& g);

Rational eval_term(const Term& t, const Ledger& start, const Ledger& end);
bool eval_goal(const Goal& g, const Ledger& start, const Ledger& end);

}  // namespace foray::goal
