#pragma once

// Quantifier-free real arithmetic terms, named constraint sets and their
// SMT-LIB2 rendering.

#include "foray/model.hpp"

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace foray::smt {

struct Expr {
  enum class Kind { Const, Var, Add, Sub, Mul, Eq, Ge, Le, Gt, Lt, And, Or, Not, True };
  Kind kind = Kind::True;
  Rational value;
  std::string name;
  std::vector<Expr> args;

  bool is_bool() const;
  bool operator==(const Expr&) const = default;
};

Expr num(const Rational& v);
Expr var(std::string name);
Expr truth();
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr eq(Expr a, Expr b);
Expr ge(Expr a, Expr b);
Expr le(Expr a, Expr b);
Expr gt(Expr a, Expr b);
Expr lt(Expr a, Expr b);
Expr all_of(std::vector<Expr> xs);
Expr any_of(std::vector<Expr> xs);
Expr negate(Expr a);

/// Free variable names, sorted.
std::set<std::string> variables(const Expr& e);

std::string to_smtlib(const Expr& e);
std::string to_smtlib(const Rational& v);

/// SMT-LIB symbol, quoted with |...| when needed.
std::string symbol(const std::string& name);

/// Exact evaluation; throws UnboundVariable.
Rational eval_arith(const Expr& e, const Model& m);
bool eval_bool(const Expr& e, const Model& m);

struct NamedAtom {
  std::string name;
  std::string partition;  // "init", "step1", ..., "goal", "kb"
  Expr formula;
};

struct ConstraintSet {
  std::string logic = "QF_NRA";
  std::vector<std::string> unknowns;  // declaration order
  std::vector<NamedAtom> atoms;       // conjunction in fold order

  void declare(const std::string& name);
  bool declared(const std::string& name) const;
  /// Throws DuplicateAtom when the name is taken.
  void add(std::string name, std::string partition, Expr formula);
  const NamedAtom* atom(const std::string& name) const;
  std::size_t count(const std::string& partition) const;

  /// Only the atoms named in `keep`, with the same declarations.
  ConstraintSet restrict_to(const std::set<std::string>& keep) const;
};

/// Full query script: options, logic, declarations, named assertions and
/// `(check-sat)`. `timeout_ms` 0 leaves the solver default.
std::string render_query(const ConstraintSet& cs, int timeout_ms = 0);

/// True when every atom holds under `m` (missing unknowns read as zero).
bool satisfies(const ConstraintSet& cs, const Model& m);

// Minimal s-expression reader for solver replies.
struct SExpr {
  std::string atom;  // empty for lists
  std::vector<SExpr> list;
  bool is_list = false;
};

/// Parses every top-level s-expression in `text`.
std::vector<SExpr> parse_sexprs(std::string_view text);

/// Reads a numeral, decimal, (- v) or (/ a b). Returns nullopt for other
/// forms such as algebraic root objects.
std::optional<Rational> rational_value(const SExpr& e);

}  // namespace foray::smt
