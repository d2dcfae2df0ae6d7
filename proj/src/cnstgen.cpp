#include "foray/cnstgen.hpp"

#include "foray/error.hpp"

#include <algorithm>
#include <set>

namespace foray::cnstgen {

namespace {

using smt::Expr;

struct Delta {
  std::string token;
  std::string address;
  Expr amount;
  bool credit = false;
};

std::string step_name(std::size_t t) { return "step" + std::to_string(t); }

Expr bal(const std::string& token, const std::string& address, std::size_t t) {
  return smt::var(balance_var(token, address, t));
}

void merge(smt::ConstraintSet& into, const smt::ConstraintSet& part) {
  for (const auto& u : part.unknowns) into.declare(u);
  for (const auto& a : part.atoms) into.add(a.name, a.partition, a.formula);
}

std::string who(const std::string& addr, const std::string& attacker) {
  return addr.empty() ? attacker : addr;
}

Expr term_expr(const goal::Term& t, std::size_t steps) {
  switch (t.kind) {
    case goal::Term::Kind::Const: return smt::num(t.value);
    case goal::Term::Kind::Balance:
      return bal(t.ref.token, t.ref.address, t.ref.epoch == goal::Epoch::Start ? 0 : steps);
    case goal::Term::Kind::Add: return term_expr(t.operands[0], steps) + term_expr(t.operands[1], steps);
    case goal::Term::Kind::Sub: return term_expr(t.operands[0], steps) - term_expr(t.operands[1], steps);
    case goal::Term::Kind::Mul: return term_expr(t.operands[0], steps) * term_expr(t.operands[1], steps);
  }
  return smt::num(0);
}

Expr formula_expr(const goal::Formula& f, std::size_t steps) {
  switch (f.kind) {
    case goal::Formula::Kind::Atom: {
      Expr l = term_expr(f.lhs, steps), r = term_expr(f.rhs, steps);
      switch (f.cmp) {
        case goal::Cmp::Eq: return smt::eq(l, r);
        case goal::Cmp::Ge: return smt::ge(l, r);
        case goal::Cmp::Lt: return smt::lt(l, r);
      }
      break;
    }
    case goal::Formula::Kind::Not: return smt::negate(formula_expr(f.children[0], steps));
    case goal::Formula::Kind::And: {
      std::vector<Expr> xs;
      for (const auto& c : f.children) xs.push_back(formula_expr(c, steps));
      return smt::all_of(std::move(xs));
    }
  }
  return smt::truth();
}

}  // namespace

MarketModel market_model(const sim::ChainState& s0) {
  MarketModel mm;
  for (const auto& [id, p] : s0.pools) mm.pools[id] = {id, p.token_a, p.token_b, p.fee};
  for (const auto& [id, b] : s0.banks) mm.banks[id] = {id, b.sells, b.accepts, b.quote_pool, b.fixed_rate};
  for (const auto& [id, l] : s0.lenders) mm.lenders[id] = {id, l.token, l.fee};
  return mm;
}

std::string balance_var(const std::string& token, const std::string& address, std::size_t t) {
  return "bal." + token + "." + address + "." + std::to_string(t);
}

Universe universe(const sim::ChainState& s0, const std::vector<afl::Op>& ops,
                  const goal::Goal& psi, const MarketModel& mm) {
  std::set<std::string> tokens, addresses{s0.attacker};
  auto add_addr = [&](const std::string& a) {
    if (!a.empty()) addresses.insert(a);
  };
  for (const auto& op : ops) {
    for (const auto* t : {&op.token, &op.src_token, &op.tgt_token}) {
      if (!t->empty()) tokens.insert(*t);
    }
    add_addr(op.from);
    add_addr(op.to);
    add_addr(op.market);
    if (op.kind == afl::OpKind::Swap) {
      if (auto b = mm.banks.find(op.market); b != mm.banks.end() && b->second.pool) {
        add_addr(*b->second.pool);
      }
    }
  }
  for (const auto& r : goal::balance_refs(psi)) {
    tokens.insert(r.token);
    addresses.insert(r.address);
  }
  return {{tokens.begin(), tokens.end()}, {addresses.begin(), addresses.end()}};
}

Expr amount_expr(const afl::Amount& a) {
  if (const auto* h = std::get_if<afl::Hole>(&a)) return smt::var(h->smt_name());
  return smt::num(std::get<Rational>(a));
}

smt::ConstraintSet compile_op(const afl::Op& op, std::size_t t, const MarketModel& mm,
                              const Universe& u, const std::string& attacker,
                              const std::optional<afl::Amount>& principal) {
  smt::ConstraintSet cs;
  const std::string part = step_name(t + 1);
  for (const auto& h : op.holes()) {
    cs.declare(h.smt_name());
    cs.add(part + ".hole." + h.smt_name(), part, smt::ge(smt::var(h.smt_name()), smt::num(0)));
  }

  Expr x = amount_expr(op.amount);
  std::vector<Delta> deltas;
  auto down = [&](const std::string& tok, const std::string& a, Expr amt) {
    deltas.push_back({tok, a, std::move(amt), false});
  };
  auto up = [&](const std::string& tok, const std::string& a, Expr amt) {
    deltas.push_back({tok, a, std::move(amt), true});
  };
  std::vector<std::pair<std::string, Expr>> extra;

  switch (op.kind) {
    case afl::OpKind::Transfer:
      down(op.token, op.from, x);
      up(op.token, op.to, x);
      break;
    case afl::OpKind::Burn:
      down(op.token, op.from, x);
      break;
    case afl::OpKind::Mint:
      up(op.token, op.to, x);
      break;
    case afl::OpKind::Swap: {
      std::string a = who(op.to, attacker);
      const std::string& b = op.market;
      Expr y = amount_expr(op.min_out);
      down(op.src_token, a, x);
      up(op.src_token, b, x);
      down(op.tgt_token, b, y);
      up(op.tgt_token, a, y);
      if (auto p = mm.pools.find(b); p != mm.pools.end()) {
        const auto& pool = p->second;
        bool fits = (op.src_token == pool.token_a && op.tgt_token == pool.token_b) ||
                    (op.src_token == pool.token_b && op.tgt_token == pool.token_a);
        if (!fits) throw Error("MissingMarketModel", b, "pool does not trade " + op.src_token + "/" + op.tgt_token);
        Expr ru = bal(op.src_token, b, t), rv = bal(op.tgt_token, b, t);
        Expr effective = pool.fee == 0 ? x : x * smt::num(1 - pool.fee);
        extra.emplace_back("rho", smt::eq((ru + effective) * (rv - y), ru * rv));
      } else if (auto q = mm.banks.find(b); q != mm.banks.end()) {
        const auto& bank = q->second;
        if (op.src_token != bank.accepts || op.tgt_token != bank.sells) {
          throw Error("MissingMarketModel", b, "no quote for " + op.src_token + " into " + op.tgt_token);
        }
        if (bank.pool) {
          extra.emplace_back("rho", smt::eq(y * bal(bank.accepts, *bank.pool, t),
                                            x * bal(bank.sells, *bank.pool, t)));
        } else {
          extra.emplace_back("rho", smt::eq(y, x * smt::num(bank.rate)));
        }
      } else {
        throw Error("MissingMarketModel", b, "no market model for swap");
      }
      break;
    }
    case afl::OpKind::Borrow: {
      auto l = mm.lenders.find(op.market);
      if (l == mm.lenders.end() || l->second.token != op.token) {
        throw Error("MissingMarketModel", op.market, "no loan terms for " + op.token);
      }
      down(op.token, op.market, x);
      up(op.token, who(op.to, attacker), x);
      break;
    }
    case afl::OpKind::Payback: {
      auto l = mm.lenders.find(op.market);
      if (l == mm.lenders.end() || l->second.token != op.token) {
        throw Error("MissingMarketModel", op.market, "no loan terms for " + op.token);
      }
      down(op.token, who(op.from, attacker), x);
      up(op.token, op.market, x);
      if (principal) {
        Expr owed = amount_expr(*principal);
        if (l->second.fee != 0) owed = owed * smt::num(1 + l->second.fee);
        extra.emplace_back("theta", smt::eq(x, owed));
      }
      break;
    }
  }

  for (const auto& tok : u.tokens) {
    for (const auto& addr : u.addresses) {
      Expr next = bal(tok, addr, t);
      for (const auto& d : deltas) {
        if (d.token != tok || d.address != addr) continue;
        next = d.credit ? next + d.amount : next - d.amount;
      }
      std::string post = balance_var(tok, addr, t + 1);
      cs.declare(balance_var(tok, addr, t));
      cs.declare(post);
      cs.add(part + ".bal." + tok + "." + addr, part, smt::eq(smt::var(post), next));
    }
  }
  for (const auto& tok : u.tokens) {
    for (const auto& addr : u.addresses) {
      cs.add(part + ".nonneg." + tok + "." + addr, part,
             smt::ge(bal(tok, addr, t + 1), smt::num(0)));
    }
  }
  for (const auto& d : deltas) {
    bool tracked = std::count(u.tokens.begin(), u.tokens.end(), d.token) &&
                   std::count(u.addresses.begin(), u.addresses.end(), d.address);
    if (!tracked) throw Error("InvariantViolation", d.token + "@" + d.address, "balance is not tracked");
  }
  for (auto& [name, f] : extra) {
    for (const auto& v : smt::variables(f)) cs.declare(v);
    cs.add(part + "." + name, part, std::move(f));
  }
  return cs;
}

Expr goal_expr(const goal::Goal& psi, std::size_t steps) { return formula_expr(psi.formula, steps); }

smt::ConstraintSet compile_sketch(const sim::ChainState& s0, const afl::AttackSketch& sk,
                                  const goal::Goal& psi, const std::vector<smt::NamedAtom>& kb,
                                  const MarketModel& mm) {
  Universe u = universe(s0, sk.ops, psi, mm);
  smt::ConstraintSet cs;
  for (const auto& tok : u.tokens) {
    for (const auto& addr : u.addresses) {
      cs.declare(balance_var(tok, addr, 0));
      cs.add("init." + tok + "." + addr, "init",
             smt::eq(bal(tok, addr, 0), smt::num(s0.balance(tok, addr))));
    }
  }
  auto pairs = afl::loan_pairs(sk.ops);
  for (std::size_t t = 0; t < sk.ops.size(); ++t) {
    std::optional<afl::Amount> principal;
    if (auto it = pairs.find(t); it != pairs.end()) principal = sk.ops[it->second].amount;
    merge(cs, compile_op(sk.ops[t], t, mm, u, s0.attacker, principal));
  }
  Expr g = goal_expr(psi, sk.ops.size());
  for (const auto& v : smt::variables(g)) cs.declare(v);
  cs.add("goal", "goal", std::move(g));
  for (const auto& k : kb) {
    for (const auto& v : smt::variables(k.formula)) cs.declare(v);
    cs.add(k.name, "kb", k.formula);
  }
  return cs;
}

}  // namespace foray::cnstgen
