#include "foray/goal.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace foray::goal {

namespace {

enum class Tok {
  Number, Ident, LParen, RParen, Comma, Plus, Minus, Times, Eq, Ge, Gt, Le, Lt, Not, And,
  Quantifier, End
};

struct Token {
  Tok kind;
  std::string text;
  int column;
};

struct Symbol {
  std::string_view spelling;
  Tok kind;
};

// Longest spellings first so "<=" wins over "<".
constexpr Symbol kSymbols[] = {
    {"∧", Tok::And},  {"&&", Tok::And},   {"/\\", Tok::And}, {"¬", Tok::Not},
    {"≥", Tok::Ge},   {">=", Tok::Ge},    {"≤", Tok::Le},    {"<=", Tok::Le},
    {"×", Tok::Times}, {"−", Tok::Minus}, {"∃", Tok::Quantifier}, {"∀", Tok::Quantifier},
    {"(", Tok::LParen}, {")", Tok::RParen}, {",", Tok::Comma}, {"+", Tok::Plus},
    {"-", Tok::Minus},  {"*", Tok::Times},  {"=", Tok::Eq},    {">", Tok::Gt},
    {"<", Tok::Lt},     {"!", Tok::Not},
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    int col = static_cast<int>(i) + 1;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t b = i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                              s[i] == '/')) {
        ++i;
      }
      out.push_back({Tok::Number, std::string(s.substr(b, i - b)), col});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t b = i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      std::string word(s.substr(b, i - b));
      Tok kind = Tok::Ident;
      if (word == "and") kind = Tok::And;
      if (word == "not") kind = Tok::Not;
      if (word == "exists" || word == "forall") kind = Tok::Quantifier;
      out.push_back({kind, word, col});
      continue;
    }
    bool matched = false;
    for (const auto& sym : kSymbols) {
      if (s.substr(i, sym.spelling.size()) == sym.spelling) {
        out.push_back({sym.kind, std::string(sym.spelling), col});
        i += sym.spelling.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      // A binder's trailing dot is the first thing the lexer cannot read.
      for (const auto& t : out) {
        if (t.kind == Tok::Quantifier) {
          throw Error("QuantifiedGoalRejected", t.text, "goals must be quantifier-free", {1, t.column});
        }
      }
      throw Error("SyntaxError", std::string(s.substr(i, 1)), "unexpected character", {1, col});
    }
  }
  out.push_back({Tok::End, "", static_cast<int>(s.size()) + 1});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Formula parse() {
    for (const auto& t : toks_) {
      if (t.kind == Tok::Quantifier) {
        throw Error("QuantifiedGoalRejected", t.text, "goals must be quantifier-free",
                    {1, t.column});
      }
    }
    Formula f = conjunction();
    if (peek().kind != Tok::End) fail("unexpected trailing input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& next() { return toks_[i_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++i_;
    return true;
  }
  void expect(Tok k, const char* what) {
    if (!accept(k)) fail(std::string("expected ") + what);
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error("SyntaxError", peek().text, what, {1, peek().column});
  }

  Formula conjunction() {
    std::vector<Formula> parts{unary()};
    while (accept(Tok::And)) parts.push_back(unary());
    return parts.size() == 1 ? std::move(parts[0]) : Formula::conjoin(std::move(parts));
  }

  Formula unary() {
    if (accept(Tok::Not)) return Formula::negate(unary());
    if (peek().kind == Tok::LParen) {
      // Either a parenthesized formula or an atom whose left term starts
      // with a parenthesis; try the formula first.
      std::size_t save = i_;
      try {
        ++i_;
        Formula f = conjunction();
        expect(Tok::RParen, "')'");
        if (!is_comparison(peek().kind) && !is_arith(peek().kind)) return f;
      } catch (const Error&) {
      }
      i_ = save;
    }
    return atom();
  }

  static bool is_comparison(Tok k) {
    return k == Tok::Eq || k == Tok::Ge || k == Tok::Gt || k == Tok::Le || k == Tok::Lt;
  }
  static bool is_arith(Tok k) { return k == Tok::Plus || k == Tok::Minus || k == Tok::Times; }

  Formula atom() {
    Term l = sum();
    Tok op = peek().kind;
    if (!is_comparison(op)) fail("expected comparison (=, ≥, <, >, ≤)");
    ++i_;
    Term r = sum();
    switch (op) {
      case Tok::Eq: return Formula::atom(std::move(l), Cmp::Eq, std::move(r));
      case Tok::Ge: return Formula::atom(std::move(l), Cmp::Ge, std::move(r));
      case Tok::Lt: return Formula::atom(std::move(l), Cmp::Lt, std::move(r));
      case Tok::Gt: return Formula::atom(std::move(r), Cmp::Lt, std::move(l));
      default: return Formula::atom(std::move(r), Cmp::Ge, std::move(l));
    }
  }

  Term sum() {
    Term t = product();
    while (true) {
      if (accept(Tok::Plus)) {
        t = Term::binary(Term::Kind::Add, std::move(t), product());
      } else if (accept(Tok::Minus)) {
        t = Term::binary(Term::Kind::Sub, std::move(t), product());
      } else {
        return t;
      }
    }
  }

  Term product() {
    Term t = factor();
    while (accept(Tok::Times)) t = Term::binary(Term::Kind::Mul, std::move(t), factor());
    return t;
  }

  Term factor() {
    if (accept(Tok::Minus)) {
      if (peek().kind != Tok::Number) fail("expected number after '-'");
      return Term::constant(-parse_rational(next().text));
    }
    if (peek().kind == Tok::Number) {
      const Token& t = next();
      try {
        return Term::constant(parse_rational(t.text));
      } catch (const Error&) {
        throw Error("SyntaxError", t.text, "malformed number", {1, t.column});
      }
    }
    if (accept(Tok::LParen)) {
      Term t = sum();
      expect(Tok::RParen, "')'");
      return t;
    }
    if (peek().kind == Tok::Ident && peek().text == "balance") {
      ++i_;
      expect(Tok::LParen, "'(' after balance");
      BalanceRef ref;
      ref.token = ident("token");
      expect(Tok::Comma, "','");
      ref.address = ident("address");
      expect(Tok::Comma, "','");
      std::string epoch = ident("start or end");
      if (epoch == "start") {
        ref.epoch = Epoch::Start;
      } else if (epoch == "end") {
        ref.epoch = Epoch::End;
      } else {
        --i_;
        fail("epoch must be start or end");
      }
      expect(Tok::RParen, "')'");
      return Term::balance(std::move(ref));
    }
    fail("expected number, balance(...) or '('");
  }

  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident) fail(std::string("expected ") + what);
    return next().text;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

int precedence(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Add:
    case Term::Kind::Sub: return 1;
    case Term::Kind::Mul: return 2;
    default: return 3;
  }
}

std::string paren(const std::string& s) { return "(" + s + ")"; }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <typename F>
void visit_terms(const Formula& f, F&& fn) {
  std::function<void(const Term&)> term = [&](const Term& t) {
    fn(t);
    for (const auto& o : t.operands) term(o);
  };
  if (f.kind == Formula::Kind::Atom) {
    term(f.lhs);
    term(f.rhs);
  }
  for (const auto& c : f.children) visit_terms(c, fn);
}

Term resolve_term(const Term& t, const ir::ProtocolIR& p) {
  Term out = t;
  if (t.kind == Term::Kind::Balance) {
    const ir::TokenDecl* match = nullptr;
    for (const auto& decl : p.tokens) {
      if (decl.id == t.ref.token) match = &decl;
    }
    if (!match) {
      for (const auto& decl : p.tokens) {
        if (lower(decl.id) == lower(t.ref.token)) match = &decl;
      }
    }
    if (!match) throw Error("UndeclaredToken", t.ref.token, "goal references an unknown token");
    out.ref.token = match->id;
    if (t.ref.address == "attacker") out.ref.address = p.attacker;
  }
  for (auto& o : out.operands) o = resolve_term(o, p);
  return out;
}

Formula resolve_formula(const Formula& f, const ir::ProtocolIR& p) {
  Formula out = f;
  if (f.kind == Formula::Kind::Atom) {
    out.lhs = resolve_term(f.lhs, p);
    out.rhs = resolve_term(f.rhs, p);
  }
  for (auto& c : out.children) c = resolve_formula(c, p);
  return out;
}

bool eval_formula(const Formula& f, const Ledger& start, const Ledger& end) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      Rational l = eval_term(f.lhs, start, end);
      Rational r = eval_term(f.rhs, start, end);
      switch (f.cmp) {
        case Cmp::Eq: return l == r;
        case Cmp::Ge: return l >= r;
        case Cmp::Lt: return l < r;
      }
      return false;
    }
    case Formula::Kind::Not: return !eval_formula(f.children.at(0), start, end);
    case Formula::Kind::And:
      return std::all_of(f.children.begin(), f.children.end(),
                         [&](const Formula& c) { return eval_formula(c, start, end); });
  }
  return false;
}

}  // namespace

Term Term::constant(Rational v) {
  Term t;
  t.kind = Kind::Const;
  t.value = std::move(v);
  return t;
}

Term Term::balance(BalanceRef r) {
  Term t;
  t.kind = Kind::Balance;
  t.ref = std::move(r);
  return t;
}

Term Term::binary(Kind k, Term l, Term r) {
  Term t;
  t.kind = k;
  t.operands.push_back(std::move(l));
  t.operands.push_back(std::move(r));
  return t;
}

Formula Formula::atom(Term l, Cmp c, Term r) {
  Formula f;
  f.kind = Kind::Atom;
  f.cmp = c;
  f.lhs = std::move(l);
  f.rhs = std::move(r);
  return f;
}

Formula Formula::negate(Formula inner) {
  Formula f;
  f.kind = Kind::Not;
  f.children.push_back(std::move(inner));
  return f;
}

Formula Formula::conjoin(std::vector<Formula> fs) {
  Formula f;
  f.kind = Kind::And;
  f.children = std::move(fs);
  return f;
}

Goal parse_goal(std::string_view text) {
  Goal g;
  g.formula = Parser(lex(text)).parse();
  g.source = std::string(text);
  return g;
}

std::string render(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Const: {
      std::string s = format_rational(t.value);
      return is_integral(t.value) ? s : paren(s);
    }
    case Term::Kind::Balance:
      return "balance(" + t.ref.token + ", " + t.ref.address + ", " +
             (t.ref.epoch == Epoch::Start ? "start" : "end") + ")";
    default: break;
  }
  const Term& l = t.operands.at(0);
  const Term& r = t.operands.at(1);
  int prec = precedence(t);
  std::string ls = render(l);
  std::string rs = render(r);
  if (precedence(l) < prec) ls = paren(ls);
  // Left-associative: a right operand of equal precedence needs parentheses.
  if (precedence(r) <= prec) rs = paren(rs);
  const char* op = t.kind == Term::Kind::Add ? " + " : t.kind == Term::Kind::Sub ? " - " : " * ";
  return ls + op + rs;
}

std::string render(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      const char* op = f.cmp == Cmp::Eq ? " = " : f.cmp == Cmp::Ge ? " ≥ " : " < ";
      return render(f.lhs) + op + render(f.rhs);
    }
    case Formula::Kind::Not: {
      const Formula& c = f.children.at(0);
      std::string inner = render(c);
      return "¬" + (c.kind == Formula::Kind::Atom ? " " + inner : paren(inner));
    }
    case Formula::Kind::And: {
      std::string out;
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        const Formula& c = f.children[i];
        std::string s = render(c);
        if (c.kind == Formula::Kind::And) s = paren(s);
        out += (i ? " ∧ " : "") + s;
      }
      return out;
    }
  }
  return {};
}

std::string render(const Goal& g) { return render(g.formula); }

Goal resolve(const Goal& g, const ir::ProtocolIR& p) {
  Goal out = g;
  out.formula = resolve_formula(g.formula, p);
  return out;
}

Goal profit_goal(const std::string& token, const std::string& attacker) {
  Goal g;
  g.formula = Formula::atom(
      Term::constant(0), Cmp::Lt,
      Term::binary(Term::Kind::Sub, Term::balance({token, attacker, Epoch::End}),
                   Term::balance({token, attacker, Epoch::Start})));
  g.source = render(g);
  return g;
}

std::vector<Goal> generate_goals(const ir::ProtocolIR& p) {
  std::vector<Goal> out;
  for (const auto& t : p.tokens) {
    if (t.is_stablecoin) out.push_back(profit_goal(t.id, p.attacker));
  }
  return out;
}

std::vector<BalanceRef> balance_refs(const Goal& g) {
  std::vector<BalanceRef> out;
  visit_terms(g.formula, [&](const Term& t) {
    if (t.kind == Term::Kind::Balance) out.push_back(t.ref);
  });
  return out;
}

std::set<std::string> target_tokens(const Goal& g) {
  std::set<std::string> out;
  for (const auto& r : balance_refs(g)) out.insert(r.token);
  return out;
}

Rational eval_term(const Term& t, const Ledger& start, const Ledger& end) {
  switch (t.kind) {
    case Term::Kind::Const: return t.value;
    case Term::Kind::Balance:
      return balance_of(t.ref.epoch == Epoch::Start ? start : end, t.ref.token, t.ref.address);
    case Term::Kind::Add:
      return eval_term(t.operands[0], start, end) + eval_term(t.operands[1], start, end);
    case Term::Kind::Sub:
      return eval_term(t.operands[0], start, end) - eval_term(t.operands[1], start, end);
    case Term::Kind::Mul:
      return eval_term(t.operands[0], start, end) * eval_term(t.operands[1], start, end);
  }
  return 0;
}

bool eval_goal(const Goal& g, const Ledger& start, const Ledger& end) {
  return eval_formula(g.formula, start, end);
}

}  // namespace foray::goal
