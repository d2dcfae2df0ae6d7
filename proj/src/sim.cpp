#include "foray/sim.hpp"

#include "foray/error.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace foray::sim {

namespace {

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Rational fee_value(const std::string& text, SourcePos pos) {
  Rational f = parse_rational(text);
  if (f < 0 || f >= 1) throw Error("InvalidState", text, "fee must lie in [0, 1)", pos);
  return f;
}

struct Abort {
  Revert revert;
};

class Machine {
 public:
  explicit Machine(const ChainState& s0) : s_(s0) {}

  Execution run(const std::vector<afl::Op>& ops) {
    Execution ex;
    try {
      for (std::size_t i = 0; i < ops.size(); ++i) {
        index_ = i;
        step_ = StepTrace{i, afl::render(ops[i]), {}};
        apply(ops[i]);
        ex.trace.steps.push_back(std::move(step_));
      }
      index_ = ops.size();
      if (!loans_.empty()) {
        const Loan& l = loans_.back();
        fail("OpenLoan", "loan of " + format_rational(l.principal) + " " + l.token + " from " +
                             l.lender + " was not paid back");
      }
      ex.state = std::move(s_);
    } catch (const Abort& a) {
      ex.trace.revert = a.revert;
    }
    return ex;
  }

 private:
  struct Loan {
    std::string lender;
    std::string token;
    Rational principal;
    Rational fee;
  };

  [[noreturn]] void fail(const std::string& reason, const std::string& detail) {
    throw Abort{Revert{reason, detail, index_}};
  }

  static Rational amount(const afl::Amount& a) {
    if (const auto* h = std::get_if<afl::Hole>(&a)) {
      throw Error("HoleInProgram", h->display(), "programs must be hole-free");
    }
    return std::get<Rational>(a);
  }

  Rational nonneg(const afl::Amount& a) {
    Rational v = amount(a);
    if (v < 0) fail("NegativeAmount", format_rational(v));
    return v;
  }

  void adjust(const std::string& token, const std::string& addr, const Rational& delta) {
    if (delta == 0) return;
    Rational& bal = s_.balances[{token, addr}];
    if (bal + delta < 0) {
      fail("InsufficientBalance", addr + " holds " + format_rational(bal) + " " + token +
                                      ", needs " + format_rational(-delta));
    }
    bal += delta;
    if (bal == 0) s_.balances.erase({token, addr});
    Rational& d = step_.deltas[{token, addr}];
    d += delta;
    if (d == 0) step_.deltas.erase({token, addr});
  }

  void move(const std::string& token, const std::string& from, const std::string& to,
            const Rational& x) {
    adjust(token, from, -x);
    adjust(token, to, x);
  }

  std::string or_attacker(const std::string& addr) const {
    return addr.empty() ? s_.attacker : addr;
  }

  void apply(const afl::Op& op) {
    switch (op.kind) {
      case afl::OpKind::Transfer:
        move(op.token, op.from, op.to, nonneg(op.amount));
        return;
      case afl::OpKind::Mint:
        adjust(op.token, op.to, nonneg(op.amount));
        return;
      case afl::OpKind::Burn:
        adjust(op.token, op.from, -nonneg(op.amount));
        return;
      case afl::OpKind::Swap:
        swap(op);
        return;
      case afl::OpKind::Borrow:
        borrow(op);
        return;
      case afl::OpKind::Payback:
        payback(op);
        return;
    }
  }

  void swap(const afl::Op& op) {
    Rational x = nonneg(op.amount);
    Rational min_out = nonneg(op.min_out);
    std::string who = or_attacker(op.to);
    Rational y;
    std::string holder = op.market;
    if (auto p = s_.pools.find(op.market); p != s_.pools.end()) {
      const Pool& pool = p->second;
      bool forward = op.src_token == pool.token_a && op.tgt_token == pool.token_b;
      bool backward = op.src_token == pool.token_b && op.tgt_token == pool.token_a;
      if (!forward && !backward) fail("UnsupportedPair", op.src_token + "/" + op.tgt_token);
      Rational r_in = s_.balance(op.src_token, pool.id);
      Rational r_out = s_.balance(op.tgt_token, pool.id);
      if (r_in == 0 || r_out == 0) fail("EmptyPool", pool.id);
      y = Rational(floor_rational(pool_quote(r_in, r_out, x, pool.fee)));
    } else if (auto b = s_.banks.find(op.market); b != s_.banks.end()) {
      const Bank& bank = b->second;
      if (op.src_token != bank.accepts || op.tgt_token != bank.sells) {
        fail("UnsupportedPair", op.src_token + "/" + op.tgt_token);
      }
      Rational rate = bank.fixed_rate;
      if (bank.quote_pool) {
        Rational r_sells = s_.balance(bank.sells, *bank.quote_pool);
        Rational r_accepts = s_.balance(bank.accepts, *bank.quote_pool);
        if (r_accepts == 0) fail("EmptyPool", *bank.quote_pool);
        rate = r_sells / r_accepts;
      }
      y = Rational(floor_rational(x * rate));
    } else {
      fail("UnknownMarket", op.market);
    }
    if (y < min_out) {
      fail("MinOutNotMet", "got " + format_rational(y) + ", wanted " + format_rational(min_out));
    }
    move(op.src_token, who, holder, x);
    move(op.tgt_token, holder, who, y);
  }

  void borrow(const afl::Op& op) {
    auto it = s_.lenders.find(op.market);
    if (it == s_.lenders.end() || it->second.token != op.token) {
      fail("UnknownLender", op.market + " does not lend " + op.token);
    }
    Rational x = nonneg(op.amount);
    if (s_.balance(op.token, op.market) < x) {
      fail("InsufficientLiquidity", op.market + " cannot lend " + format_rational(x));
    }
    move(op.token, op.market, or_attacker(op.to), x);
    loans_.push_back({op.market, op.token, x, it->second.fee});
  }

  void payback(const afl::Op& op) {
    auto it = loans_.end();
    for (auto l = loans_.begin(); l != loans_.end(); ++l) {
      if (l->lender == op.market && l->token == op.token) it = l;
    }
    if (it == loans_.end()) fail("UnmatchedPayback", op.market + " " + op.token);
    Rational y = nonneg(op.amount);
    Rational owed = it->principal * (1 + it->fee);
    if (y < owed) {
      fail("InsufficientRepayment", "paid " + format_rational(y) + ", owed " + format_rational(owed));
    }
    move(op.token, or_attacker(op.from), op.market, y);
    loans_.erase(it);
  }

  ChainState s_;
  std::vector<Loan> loans_;
  std::size_t index_ = 0;
  StepTrace step_;
};

}  // namespace

ChainState load_state(std::string_view text) {
  ChainState s;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  bool attacker_seen = false;
  auto seen = [&](const std::string& id) {
    return s.pools.contains(id) || s.lenders.contains(id) || s.banks.contains(id);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto w = words(raw);
    if (w.empty()) continue;
    SourcePos pos{line_no, 1};
    auto expect = [&](std::size_t n, const char* shape) {
      if (w.size() != n) throw Error("SyntaxError", w[0], std::string("expected: ") + shape, pos);
    };
    if (w[0] == "attacker") {
      expect(2, "attacker <address>");
      if (attacker_seen) throw Error("InvalidState", w[1], "attacker declared twice", pos);
      attacker_seen = true;
      s.attacker = w[1];
    } else if (w[0] == "balance") {
      expect(4, "balance <token> <address> <amount>");
      Rational v = parse_rational(w[3]);
      if (v < 0) throw Error("InvalidState", w[1] + "@" + w[2], "negative balance", pos);
      if (s.balances.contains({w[1], w[2]})) {
        throw Error("InvalidState", w[1] + "@" + w[2], "balance given twice", pos);
      }
      if (v != 0) s.balances[{w[1], w[2]}] = v;
    } else if (w[0] == "pool") {
      expect(6, "pool <id> <token> <token> fee <fraction>");
      if (w[4] != "fee") throw Error("SyntaxError", w[4], "expected 'fee'", pos);
      if (seen(w[1])) throw Error("InvalidState", w[1], "market declared twice", pos);
      if (w[2] == w[3]) throw Error("InvalidState", w[1], "pool needs two distinct tokens", pos);
      s.pools[w[1]] = Pool{w[1], w[2], w[3], fee_value(w[5], pos)};
    } else if (w[0] == "lender") {
      expect(5, "lender <id> <token> fee <fraction>");
      if (w[3] != "fee") throw Error("SyntaxError", w[3], "expected 'fee'", pos);
      if (seen(w[1])) throw Error("InvalidState", w[1], "market declared twice", pos);
      s.lenders[w[1]] = Lender{w[1], w[2], fee_value(w[4], pos)};
    } else if (w[0] == "bank") {
      // bank <id> sells <token> for <token> quote pool <pool> | quote fixed <rate>
      expect(9, "bank <id> sells <token> for <token> quote (pool <id> | fixed <rate>)");
      if (w[2] != "sells" || w[4] != "for" || w[6] != "quote") {
        throw Error("SyntaxError", w[1], "expected 'sells', 'for' and 'quote'", pos);
      }
      if (seen(w[1])) throw Error("InvalidState", w[1], "market declared twice", pos);
      Bank b{w[1], w[3], w[5], std::nullopt, Rational(0)};
      if (w[7] == "pool") {
        b.quote_pool = w[8];
      } else if (w[7] == "fixed") {
        b.fixed_rate = parse_rational(w[8]);
        if (b.fixed_rate < 0) throw Error("InvalidState", w[1], "negative rate", pos);
      } else {
        throw Error("SyntaxError", w[7], "expected 'pool' or 'fixed'", pos);
      }
      s.banks[w[1]] = b;
    } else {
      throw Error("SyntaxError", w[0], "unknown declaration", pos);
    }
  }
  for (const auto& [id, b] : s.banks) {
    if (!b.quote_pool) continue;
    auto p = s.pools.find(*b.quote_pool);
    if (p == s.pools.end()) throw Error("InvalidState", id, "quote pool " + *b.quote_pool + " is not declared");
    bool covers = (p->second.token_a == b.sells && p->second.token_b == b.accepts) ||
                  (p->second.token_b == b.sells && p->second.token_a == b.accepts);
    if (!covers) throw Error("InvalidState", id, "quote pool does not trade " + b.sells + "/" + b.accepts);
  }
  return s;
}

std::string serialize_state(const ChainState& s) {
  std::ostringstream out;
  out << "attacker " << s.attacker << "\n";
  for (const auto& [id, p] : s.pools) {
    out << "pool " << id << " " << p.token_a << " " << p.token_b << " fee " << format_rational(p.fee) << "\n";
  }
  for (const auto& [id, l] : s.lenders) {
    out << "lender " << id << " " << l.token << " fee " << format_rational(l.fee) << "\n";
  }
  for (const auto& [id, b] : s.banks) {
    out << "bank " << id << " sells " << b.sells << " for " << b.accepts << " quote ";
    if (b.quote_pool) {
      out << "pool " << *b.quote_pool << "\n";
    } else {
      out << "fixed " << format_rational(b.fixed_rate) << "\n";
    }
  }
  for (const auto& [key, v] : s.balances) {
    out << "balance " << key.first << " " << key.second << " " << format_rational(v) << "\n";
  }
  return out.str();
}

Rational pool_quote(const Rational& reserve_in, const Rational& reserve_out,
                    const Rational& amount_in, const Rational& fee) {
  Rational effective = amount_in * (1 - fee);
  if (reserve_in + effective == 0) return 0;
  return reserve_out * effective / (reserve_in + effective);
}

Execution execute(const std::vector<afl::Op>& ops, const ChainState& s0) {
  for (const auto& op : ops) {
    if (!op.holes().empty()) {
      throw Error("HoleInProgram", op.holes().front().display(), "programs must be hole-free");
    }
  }
  Machine m(s0);
  Execution ex = m.run(ops);
  if (ex.reverted()) ex.state = s0;
  return ex;
}

bool eval_goal(const goal::Goal& g, const ChainState& start, const ChainState& end) {
  return goal::eval_goal(g, start.balances, end.balances);
}

Verdict validate(const afl::AttackProgram& p, const ChainState& s0, const goal::Goal& g) {
  Verdict v;
  Execution ex = execute(p, s0);
  v.trace = ex.trace;
  v.end = ex.state;
  if (ex.reverted()) {
    v.reason = ex.trace.revert->reason;
    return v;
  }
  v.pass = eval_goal(g, s0, ex.state);
  if (!v.pass) v.reason = "GoalNotMet";
  return v;
}

nlohmann::json to_json(const ExecutionTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& [key, d] : s.deltas) {
      deltas.push_back({{"token", key.first}, {"address", key.second}, {"delta", format_rational(d)}});
    }
    steps.push_back({{"index", s.index}, {"op", s.op}, {"deltas", deltas}});
  }
  nlohmann::json revert = nullptr;
  if (t.revert) {
    revert = {{"reason", t.revert->reason}, {"detail", t.revert->detail}, {"op_index", t.revert->op_index}};
  }
  return {{"steps", steps}, {"revert", revert}};
}

nlohmann::json to_json(const Verdict& v) {
  nlohmann::json out{{"pass", v.pass}, {"reason", v.reason}, {"trace", to_json(v.trace)}};
  return out;
}

}  // namespace foray::sim
