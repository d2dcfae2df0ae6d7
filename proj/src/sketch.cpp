#include "foray/sketch.hpp"

#include "foray/error.hpp"

#include <algorithm>

namespace foray::sketch {

namespace {

using smt::Expr;

Expr bal(const std::string& token, const std::string& address, std::size_t t) {
  return smt::var("bal." + token + "." + address + "." + std::to_string(t));
}

std::vector<std::string> tokens_of(const tfg::TokenFlowGraph& g) {
  std::vector<std::string> out;
  for (const auto& n : g.nodes) {
    if (n != tfg::kEpsilon) out.push_back(n);
  }
  return out;
}

void declare_all(smt::ConstraintSet& cs, const Expr& e) {
  for (const auto& v : smt::variables(e)) cs.declare(v);
}

}  // namespace

SearchState init_search(const tfg::TokenFlowGraph& g, const sim::ChainState& s0) {
  SearchState st;
  for (const auto& tok : tokens_of(g)) {
    if (s0.balance(tok, s0.attacker) > 0) st.held.insert(tok);
  }
  if (st.held.empty()) st.held.insert(tfg::kEpsilon);
  st.omega = path_constraints(g, s0, {});
  return st;
}

std::vector<const tfg::Edge*> edges_of(const tfg::TokenFlowGraph& g,
                                       const std::vector<std::size_t>& path) {
  std::vector<const tfg::Edge*> out;
  for (auto id : path) out.push_back(&g.edges.at(id));
  return out;
}

std::vector<std::size_t> frontier(const tfg::TokenFlowGraph& g, const std::set<std::string>& held) {
  std::vector<std::size_t> out;
  for (const auto& e : g.edges) {
    if (held.contains(e.src)) out.push_back(e.id);
  }
  return out;
}

bool stack_consistent(const std::vector<afl::Op>& ops) {
  std::vector<const afl::Op*> open;
  for (const auto& op : ops) {
    if (op.kind == afl::OpKind::Borrow) {
      open.push_back(&op);
    } else if (op.kind == afl::OpKind::Payback) {
      if (open.empty() || open.back()->market != op.market || open.back()->token != op.token) {
        return false;
      }
      open.pop_back();
    }
  }
  return true;
}

smt::ConstraintSet path_constraints(const tfg::TokenFlowGraph& g, const sim::ChainState& s0,
                                    const std::vector<std::size_t>& path, const KnowledgeBase& kb) {
  const std::string& att = s0.attacker;
  auto tokens = tokens_of(g);
  smt::ConstraintSet cs;
  for (const auto& tok : tokens) {
    cs.declare("bal." + tok + "." + att + ".0");
    cs.add("init." + tok + "." + att, "init", smt::eq(bal(tok, att, 0), smt::num(s0.balance(tok, att))));
  }

  auto edges = edges_of(g, path);
  int next_hole = 1;
  auto ops = afl::ops_from_path(edges, next_hole);
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const afl::Op& op = ops[i];
    const tfg::Edge& e = *edges[i];
    const std::size_t t = i + 1;
    const std::string part = "step" + std::to_string(t);

    Expr x = smt::var(std::get<afl::Hole>(op.amount).smt_name());
    std::optional<Expr> y;
    if (op.kind == afl::OpKind::Swap) y = smt::var(std::get<afl::Hole>(op.min_out).smt_name());
    for (const auto& h : op.holes()) {
      cs.declare(h.smt_name());
      cs.add(part + ".hole." + h.smt_name(), part, smt::gt(smt::var(h.smt_name()), smt::num(0)));
    }

    for (std::size_t j = 0; j < e.phi.atoms.size(); ++j) {
      const auto& a = e.phi.atoms[j];
      Expr lhs = bal(a.lhs.token, a.lhs.address, a.lhs.post ? t : t - 1);
      Expr rhs;
      if (const auto* r = std::get_if<tfg::BalanceRef>(&a.rhs)) {
        rhs = bal(r->token, r->address, r->post ? t : t - 1);
      } else {
        rhs = std::get<tfg::Slot>(a.rhs) == tfg::Slot::X ? x : *y;
      }
      Expr f = a.cmp == tfg::Cmp::Ge ? smt::ge(lhs, rhs) : smt::le(lhs, rhs);
      declare_all(cs, f);
      cs.add(part + ".phi" + std::to_string(j), part, std::move(f));
    }

    std::map<std::string, Expr> next;
    for (const auto& tok : tokens) next.emplace(tok, bal(tok, att, t - 1));
    auto credit = [&](const std::string& tok, const Expr& amt) { next[tok] = next[tok] + amt; };
    auto debit = [&](const std::string& tok, const Expr& amt) { next[tok] = next[tok] - amt; };
    switch (op.kind) {
      case afl::OpKind::Transfer:
        if (op.from == att) debit(op.token, x);
        if (op.to == att) credit(op.token, x);
        break;
      case afl::OpKind::Burn:
        if (op.from == att) debit(op.token, x);
        break;
      case afl::OpKind::Mint:
      case afl::OpKind::Borrow:
        if (op.to == att) credit(op.token, x);
        break;
      case afl::OpKind::Payback:
        if (op.from == att) debit(op.token, x);
        break;
      case afl::OpKind::Swap:
        if (op.to == att) {
          debit(op.src_token, x);
          credit(op.tgt_token, *y);
        }
        break;
    }
    for (const auto& tok : tokens) {
      cs.declare("bal." + tok + "." + att + "." + std::to_string(t));
      cs.add(part + ".bal." + tok + "." + att, part, smt::eq(bal(tok, att, t), next.at(tok)));
    }
    for (const auto& tok : tokens) {
      cs.add(part + ".nonneg." + tok + "." + att, part, smt::ge(bal(tok, att, t), smt::num(0)));
    }

    if (op.kind == afl::OpKind::Borrow) {
      open.push_back(i);
    } else if (op.kind == afl::OpKind::Payback && !open.empty()) {
      Expr principal = smt::var(std::get<afl::Hole>(ops[open.back()].amount).smt_name());
      cs.add(part + ".repay", part, smt::ge(x, principal));
      open.pop_back();
    }
  }

  for (const auto& atom : applicable(kb, path)) {
    declare_all(cs, atom.formula);
    cs.add(atom.name, atom.partition, atom.formula);
  }
  return cs;
}

SketchSearch::SketchSearch(const tfg::TokenFlowGraph& g, const sim::ChainState& s0,
                           const goal::Goal& psi, SketchBudget budget, solver::Session& session)
    : g_(g), s0_(s0), targets_(goal::target_tokens(psi)), budget_(budget), session_(session) {
  if (budget.max_depth == 0 || budget.max_sketches == 0 || budget.probe_timeout_ms <= 0) {
    throw Error("InvalidBudget", "sketch", "budgets must be positive");
  }
  queue_.push_back(init_search(g, s0));
}

std::optional<afl::AttackSketch> SketchSearch::next(const KnowledgeBase& kb) {
  while (yielded_ < budget_.max_sketches) {
    if (!current_) {
      if (queue_.empty()) return std::nullopt;
      current_ = std::move(queue_.front());
      queue_.pop_front();
      candidates_ = current_->depth() < budget_.max_depth ? frontier(g_, current_->held)
                                                          : std::vector<std::size_t>{};
      cursor_ = 0;
    }
    if (cursor_ == candidates_.size()) {
      current_.reset();
      continue;
    }
    const tfg::Edge& e = g_.edges[candidates_[cursor_++]];
    SearchState child;
    child.path = current_->path;
    child.path.push_back(e.id);
    const std::string prefix =
        "depth=" + std::to_string(child.depth()) + " edge=e" + std::to_string(e.id) + " " + e.label();

    auto edges = edges_of(g_, child.path);
    int next_hole = 1;
    auto ops = afl::ops_from_path(edges, next_hole);
    if (!stack_consistent(ops)) {
      trace_.push_back(prefix + " unpaired");
      continue;
    }

    child.omega = path_constraints(g_, s0_, child.path, kb);
    solver::Result r;
    try {
      r = session_.check(child.omega, budget_.probe_timeout_ms);
    } catch (const Error& err) {
      throw Error(err.code(), err.subject(),
                  err.detail() + "\nprobe:\n" + smt::render_query(child.omega, budget_.probe_timeout_ms));
    }
    ++probes_;
    trace_.push_back(prefix + " " + std::string(solver::to_string(r.status)));
    // Unknown is not a refutation, so the edge stays.
    if (r.status == solver::Status::Unsat) continue;

    child.held = current_->held;
    child.held.insert(e.dst);
    bool covered = std::includes(child.held.begin(), child.held.end(), targets_.begin(), targets_.end());
    bool paired = afl::loans_paired(ops);
    queue_.push_back(child);
    if (!covered || !paired) continue;

    afl::AttackSketch sk = afl::sketch_from_path(edges);
    if (!seen_.insert(afl::render(sk)).second) continue;
    ++yielded_;
    return sk;
  }
  return std::nullopt;
}

}  // namespace foray::sketch
