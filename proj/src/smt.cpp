#include "foray/smt.hpp"

#include "foray/error.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace foray::smt {

namespace {

Expr node(Expr::Kind k, std::vector<Expr> args) {
  Expr e;
  e.kind = k;
  e.args = std::move(args);
  return e;
}

const char* op_name(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add: return "+";
    case Expr::Kind::Sub: return "-";
    case Expr::Kind::Mul: return "*";
    case Expr::Kind::Eq: return "=";
    case Expr::Kind::Ge: return ">=";
    case Expr::Kind::Le: return "<=";
    case Expr::Kind::Gt: return ">";
    case Expr::Kind::Lt: return "<";
    case Expr::Kind::And: return "and";
    case Expr::Kind::Or: return "or";
    case Expr::Kind::Not: return "not";
    default: return "?";
  }
}

void collect_vars(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Var) out.insert(e.name);
  for (const auto& a : e.args) collect_vars(a, out);
}

void render(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Const: out += to_smtlib(e.value); return;
    case Expr::Kind::Var: out += symbol(e.name); return;
    case Expr::Kind::True: out += "true"; return;
    default: break;
  }
  out += "(";
  out += op_name(e.kind);
  for (const auto& a : e.args) {
    out += " ";
    render(a, out);
  }
  out += ")";
}

bool simple_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) ||
         std::string_view("~!@$%^&*_-+=<>.?/").find(c) != std::string_view::npos;
}

std::string decimal(const Integer& v) { return v.str() + ".0"; }

}  // namespace

bool Expr::is_bool() const {
  switch (kind) {
    case Kind::Const:
    case Kind::Var:
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul: return false;
    default: return true;
  }
}

Expr num(const Rational& v) {
  Expr e;
  e.kind = Expr::Kind::Const;
  e.value = v;
  return e;
}

Expr var(std::string name) {
  Expr e;
  e.kind = Expr::Kind::Var;
  e.name = std::move(name);
  return e;
}

Expr truth() { return Expr{}; }

Expr operator+(Expr a, Expr b) { return node(Expr::Kind::Add, {std::move(a), std::move(b)}); }
Expr operator-(Expr a, Expr b) { return node(Expr::Kind::Sub, {std::move(a), std::move(b)}); }
Expr operator*(Expr a, Expr b) { return node(Expr::Kind::Mul, {std::move(a), std::move(b)}); }
Expr eq(Expr a, Expr b) { return node(Expr::Kind::Eq, {std::move(a), std::move(b)}); }
Expr ge(Expr a, Expr b) { return node(Expr::Kind::Ge, {std::move(a), std::move(b)}); }
Expr le(Expr a, Expr b) { return node(Expr::Kind::Le, {std::move(a), std::move(b)}); }
Expr gt(Expr a, Expr b) { return node(Expr::Kind::Gt, {std::move(a), std::move(b)}); }
Expr lt(Expr a, Expr b) { return node(Expr::Kind::Lt, {std::move(a), std::move(b)}); }

Expr all_of(std::vector<Expr> xs) {
  if (xs.empty()) return truth();
  if (xs.size() == 1) return std::move(xs[0]);
  return node(Expr::Kind::And, std::move(xs));
}

Expr any_of(std::vector<Expr> xs) {
  if (xs.size() == 1) return std::move(xs[0]);
  if (xs.empty()) return negate(truth());
  return node(Expr::Kind::Or, std::move(xs));
}

Expr negate(Expr a) { return node(Expr::Kind::Not, {std::move(a)}); }

std::set<std::string> variables(const Expr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

std::string to_smtlib(const Rational& v) {
  Integer n = boost::multiprecision::numerator(v);
  Integer d = boost::multiprecision::denominator(v);
  bool negative = n < 0;
  if (negative) n = -n;
  std::string body = d == 1 ? decimal(n) : "(/ " + decimal(n) + " " + decimal(d) + ")";
  return negative ? "(- " + body + ")" : body;
}

std::string to_smtlib(const Expr& e) {
  std::string out;
  render(e, out);
  return out;
}

std::string symbol(const std::string& name) {
  bool simple = !name.empty() && !std::isdigit(static_cast<unsigned char>(name[0])) &&
                std::all_of(name.begin(), name.end(), simple_symbol_char);
  return simple ? name : "|" + name + "|";
}

Rational eval_arith(const Expr& e, const Model& m) {
  switch (e.kind) {
    case Expr::Kind::Const: return e.value;
    case Expr::Kind::Var: {
      auto it = m.find(e.name);
      if (it == m.end()) throw Error("UnboundVariable", e.name, "no value in model");
      return it->second;
    }
    case Expr::Kind::Add: return eval_arith(e.args[0], m) + eval_arith(e.args[1], m);
    case Expr::Kind::Sub: return eval_arith(e.args[0], m) - eval_arith(e.args[1], m);
    case Expr::Kind::Mul: return eval_arith(e.args[0], m) * eval_arith(e.args[1], m);
    default: throw Error("TypeError", to_smtlib(e), "expected an arithmetic term");
  }
}

bool eval_bool(const Expr& e, const Model& m) {
  switch (e.kind) {
    case Expr::Kind::True: return true;
    case Expr::Kind::Eq: return eval_arith(e.args[0], m) == eval_arith(e.args[1], m);
    case Expr::Kind::Ge: return eval_arith(e.args[0], m) >= eval_arith(e.args[1], m);
    case Expr::Kind::Le: return eval_arith(e.args[0], m) <= eval_arith(e.args[1], m);
    case Expr::Kind::Gt: return eval_arith(e.args[0], m) > eval_arith(e.args[1], m);
    case Expr::Kind::Lt: return eval_arith(e.args[0], m) < eval_arith(e.args[1], m);
    case Expr::Kind::And:
      return std::all_of(e.args.begin(), e.args.end(), [&](const Expr& a) { return eval_bool(a, m); });
    case Expr::Kind::Or:
      return std::any_of(e.args.begin(), e.args.end(), [&](const Expr& a) { return eval_bool(a, m); });
    case Expr::Kind::Not: return !eval_bool(e.args[0], m);
    default: throw Error("TypeError", to_smtlib(e), "expected a formula");
  }
}

void ConstraintSet::declare(const std::string& name) {
  if (!declared(name)) unknowns.push_back(name);
}

bool ConstraintSet::declared(const std::string& name) const {
  return std::find(unknowns.begin(), unknowns.end(), name) != unknowns.end();
}

void ConstraintSet::add(std::string name, std::string partition, Expr formula) {
  if (atom(name)) throw Error("DuplicateAtom", name, "atom names must be unique");
  atoms.push_back({std::move(name), std::move(partition), std::move(formula)});
}

const NamedAtom* ConstraintSet::atom(const std::string& name) const {
  for (const auto& a : atoms) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::size_t ConstraintSet::count(const std::string& partition) const {
  return static_cast<std::size_t>(std::count_if(
      atoms.begin(), atoms.end(), [&](const NamedAtom& a) { return a.partition == partition; }));
}

ConstraintSet ConstraintSet::restrict_to(const std::set<std::string>& keep) const {
  ConstraintSet out;
  out.logic = logic;
  out.unknowns = unknowns;
  for (const auto& a : atoms) {
    if (keep.contains(a.name)) out.atoms.push_back(a);
  }
  return out;
}

std::string render_query(const ConstraintSet& cs, int timeout_ms) {
  std::string out;
  out += "(set-option :produce-models true)\n";
  out += "(set-option :produce-unsat-cores true)\n";
  if (timeout_ms > 0) out += "(set-option :timeout " + std::to_string(timeout_ms) + ")\n";
  out += "(set-logic " + cs.logic + ")\n";
  for (const auto& u : cs.unknowns) out += "(declare-const " + symbol(u) + " Real)\n";
  for (const auto& a : cs.atoms) {
    out += "(assert (! " + to_smtlib(a.formula) + " :named " + symbol(a.name) + "))\n";
  }
  out += "(check-sat)\n";
  return out;
}

bool satisfies(const ConstraintSet& cs, const Model& m) {
  Model full = m;
  for (const auto& u : cs.unknowns) full.try_emplace(u, Rational(0));
  return std::all_of(cs.atoms.begin(), cs.atoms.end(),
                     [&](const NamedAtom& a) { return eval_bool(a.formula, full); });
}

std::vector<SExpr> parse_sexprs(std::string_view text) {
  std::vector<SExpr> stack(1);
  stack[0].is_list = true;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == ';') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '(') {
      SExpr l;
      l.is_list = true;
      stack.push_back(std::move(l));
      ++i;
    } else if (c == ')') {
      if (stack.size() < 2) throw Error("ProtocolError", std::string(text), "unbalanced ')'");
      SExpr done = std::move(stack.back());
      stack.pop_back();
      stack.back().list.push_back(std::move(done));
      ++i;
    } else if (c == '"') {
      std::size_t b = i++;
      while (i < text.size()) {
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            i += 2;
            continue;
          }
          break;
        }
        ++i;
      }
      ++i;
      SExpr a;
      a.atom = std::string(text.substr(b, i - b));
      stack.back().list.push_back(std::move(a));
    } else if (c == '|') {
      std::size_t b = ++i;
      while (i < text.size() && text[i] != '|') ++i;
      SExpr a;
      a.atom = std::string(text.substr(b, i - b));
      stack.back().list.push_back(std::move(a));
      ++i;
    } else {
      std::size_t b = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
             text[i] != '(' && text[i] != ')') {
        ++i;
      }
      SExpr a;
      a.atom = std::string(text.substr(b, i - b));
      stack.back().list.push_back(std::move(a));
    }
  }
  if (stack.size() != 1) throw Error("ProtocolError", std::string(text), "unbalanced '('");
  return std::move(stack[0].list);
}

std::optional<Rational> rational_value(const SExpr& e) {
  if (!e.is_list) {
    try {
      return parse_rational(e.atom);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  if (e.list.size() == 2 && !e.list[0].is_list && e.list[0].atom == "-") {
    auto v = rational_value(e.list[1]);
    if (v) return Rational(-*v);
    return std::nullopt;
  }
  if (e.list.size() == 3 && !e.list[0].is_list && e.list[0].atom == "/") {
    auto a = rational_value(e.list[1]);
    auto b = rational_value(e.list[2]);
    if (a && b && *b != 0) return Rational(*a / *b);
  }
  return std::nullopt;
}

}  // namespace foray::smt
