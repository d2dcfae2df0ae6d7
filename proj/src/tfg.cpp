#include "foray/tfg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace foray::tfg {

namespace {

std::string superscript(int n) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
  std::string out;
  for (char c : std::to_string(n)) out += digits[c - '0'];
  return out;
}

std::string render_ref(const BalanceRef& r) {
  return r.token + (r.post ? "′[" : "[") + r.address + "]";
}

BalanceRef pre(const std::string& token, const std::string& addr) {
  return {token, addr, false};
}
BalanceRef post(const std::string& token, const std::string& addr) {
  return {token, addr, true};
}

// u[a] ≥ x ∧ u′[a] ≤ u[a]
EdgeConstraint spend_phi(const std::string& u, const std::string& a) {
  return {{{pre(u, a), Cmp::Ge, Slot::X}, {post(u, a), Cmp::Le, pre(u, a)}}, {}};
}

// u′[a] ≥ x ∧ u′[a] ≥ u[a]
EdgeConstraint gain_phi(const std::string& u, const std::string& a) {
  return {{{post(u, a), Cmp::Ge, Slot::X}, {post(u, a), Cmp::Ge, pre(u, a)}}, {}};
}

// u[a] ≥ x ∧ u′[a] ≤ u[a] ∧ v′[a] ≥ y ∧ v′[a] ≥ v[a]
EdgeConstraint swap_phi(const std::string& u, const std::string& v, const std::string& a,
                        const std::string& b) {
  EdgeConstraint phi{{{pre(u, a), Cmp::Ge, Slot::X},
                      {post(u, a), Cmp::Le, pre(u, a)},
                      {post(v, a), Cmp::Ge, Slot::Y},
                      {post(v, a), Cmp::Ge, pre(v, a)}},
                     "constraints on " + b + " omitted"};
  return phi;
}

struct FunctionIndex {
  std::size_t index;
  const ir::FunctionDecl* fn;
};

// Walks one block and pairs adjacent back-and-forth flows. Flows already
// consumed are invisible; branches break adjacency.
void find_swaps(const std::vector<ir::Statement>& block, const FlowState& state,
                std::set<ir::StmtId>& consumed,
                std::vector<std::pair<const FlowPredicate*, const FlowPredicate*>>& out) {
  const FlowPredicate* prev = nullptr;
  for (const auto& stmt : block) {
    if (const auto* branch = std::get_if<ir::Branch>(&stmt.kind)) {
      prev = nullptr;
      find_swaps(branch->then_body, state, consumed, out);
      find_swaps(branch->else_body, state, consumed, out);
      continue;
    }
    const FlowPredicate* flow = state.find(stmt.id);
    if (!flow || consumed.contains(flow->origin)) continue;
    if (prev && prev->token != flow->token && prev->src == flow->dst &&
        prev->dst == flow->src && prev->src != kDead && prev->dst != kDead) {
      out.emplace_back(prev, flow);
      consumed.insert(prev->origin);
      consumed.insert(flow->origin);
      prev = nullptr;
      continue;
    }
    prev = flow;
  }
}

struct PendingEdge {
  std::size_t fn_index;
  ir::StmtId anchor;
  int rank;
  Edge edge;
};

}  // namespace

const FlowPredicate* FlowState::find(ir::StmtId id) const {
  for (const auto& e : entries) {
    if (e.origin == id) return &e;
  }
  return nullptr;
}

std::string_view to_string(Op op) {
  switch (op) {
    case Op::Transfer: return "transfer";
    case Op::Mint: return "mint";
    case Op::Burn: return "burn";
    case Op::Swap: return "swap";
    case Op::Borrow: return "borrow";
    case Op::Payback: return "payback";
  }
  return "transfer";
}

std::string EdgeConstraint::render() const {
  std::string out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const Atom& a = atoms[i];
    if (i) out += " ∧ ";
    out += render_ref(a.lhs);
    out += a.cmp == Cmp::Ge ? " ≥ " : " ≤ ";
    if (const auto* r = std::get_if<BalanceRef>(&a.rhs)) {
      out += render_ref(*r);
    } else {
      out += std::get<Slot>(a.rhs) == Slot::X ? "x" : "y";
    }
  }
  if (!omitted.empty()) out += "  (" + omitted + ")";
  return out;
}

std::string Edge::in_token() const {
  switch (op) {
    case Op::Swap:
    case Op::Transfer:
    case Op::Burn:
    case Op::Payback: return src;
    default: return {};
  }
}

std::string Edge::out_token() const {
  switch (op) {
    case Op::Swap:
    case Op::Borrow:
    case Op::Mint: return dst;
    default: return {};
  }
}

std::string Edge::label() const {
  return std::string(to_string(op)) + superscript(ordinal) + (mirrored ? "ʳ" : "");
}

std::vector<const Edge*> TokenFlowGraph::out_edges(std::string_view node) const {
  std::vector<const Edge*> out;
  for (const auto& e : edges) {
    if (e.src == node) out.push_back(&e);
  }
  return out;
}

bool TokenFlowGraph::has_node(std::string_view node) const {
  return std::find(nodes.begin(), nodes.end(), node) != nodes.end();
}

FlowState infer_flows(const ir::FunctionDecl& f, const ir::ProtocolIR& p) {
  FlowState state;
  state.function = f.id();
  auto addr = [&](const std::string& term) { return ir::resolve_address(term, f, p); };
  ir::for_each_statement(f.body, [&](const ir::Statement& s) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, ir::TransferFrom>) {
            state.entries.push_back({k.token, k.amount, addr(k.from), addr(k.to), s.id});
          } else if constexpr (std::is_same_v<T, ir::TransferTo>) {
            state.entries.push_back({k.token, k.amount, f.owner, addr(k.to), s.id});
          } else if constexpr (std::is_same_v<T, ir::Mint>) {
            state.entries.push_back({k.token, k.amount, kDead, addr(k.to), s.id});
          } else if constexpr (std::is_same_v<T, ir::Burn>) {
            state.entries.push_back({k.token, k.amount, addr(k.from), kDead, s.id});
          }
        },
        s.kind);
  });
  return state;
}

std::vector<Edge> infer_edges(const std::map<std::string, FlowState>& states,
                              const ir::ProtocolIR& p) {
  std::vector<FunctionIndex> functions;
  {
    std::size_t index = 0;
    for (const auto* f : p.all_functions()) {
      if (f->is_public()) functions.push_back({index, f});
      ++index;
    }
  }

  std::vector<PendingEdge> pending;
  for (const auto& [fn_index, fn] : functions) {
    auto it = states.find(fn->id());
    if (it == states.end()) {
      throw Error("MissingFlowState", fn->id(), "no flow state for public function");
    }
    const FlowState& state = it->second;
    std::set<ir::StmtId> consumed;

    // Loans: a flow before a callback, repaid by a reversed flow in the hook.
    std::vector<const ir::Statement*> order;
    ir::for_each_statement(fn->body, [&](const ir::Statement& s) { order.push_back(&s); });
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const ir::Statement* stmt = order[pos];
      const auto* cb = std::get_if<ir::Callback>(&stmt->kind);
      if (!cb) continue;
      const ir::FunctionDecl* hook = p.function(cb->handle, fn->owner);
      if (!hook) throw Error("UndeclaredFunction", cb->handle, "callback target", stmt->pos);
      auto hs = states.find(hook->id());
      if (hs == states.end()) {
        throw Error("MissingFlowState", hook->id(), "no flow state for hook");
      }
      std::vector<std::pair<const FlowPredicate*, const FlowPredicate*>> candidates;
      for (std::size_t before = 0; before < pos; ++before) {
        const FlowPredicate* s1 = state.find(order[before]->id);
        if (!s1 || consumed.contains(s1->origin)) continue;
        if (s1->src == kDead || s1->dst == kDead) continue;
        for (const auto& s3 : hs->second.entries) {
          if (s3.token == s1->token && s3.src == s1->dst && s3.dst == s1->src) {
            candidates.emplace_back(s1, &s3);
          }
        }
      }
      if (candidates.empty()) continue;
      if (candidates.size() > 1) {
        throw Error("AmbiguousLoanPattern", fn->id(),
                    std::to_string(candidates.size()) + " flow pairs match callback " +
                        cb->handle,
                    stmt->pos);
      }
      const auto [s1, s3] = candidates.front();
      consumed.insert(s1->origin);
      const std::string& lender = s1->src;
      const std::string& borrower = s1->dst;

      Edge borrow;
      borrow.src = kEpsilon;
      borrow.dst = s1->token;
      borrow.op = Op::Borrow;
      borrow.phi = gain_phi(s1->token, borrower);
      borrow.phi.omitted = "constraints on " + lender + " omitted";
      borrow.function = fn->id();
      borrow.statements = {s1->origin, stmt->id};
      borrow.actor = borrower;
      borrow.counterparty = lender;
      borrow.amount_x = s1->amount;
      pending.push_back({fn_index, s1->origin, 0, borrow});

      Edge payback;
      payback.src = s1->token;
      payback.dst = kEpsilon;
      payback.op = Op::Payback;
      payback.phi = spend_phi(s1->token, borrower);
      payback.phi.omitted = "constraints on " + lender + " omitted";
      payback.function = fn->id();
      payback.statements = {s3->origin};
      payback.actor = borrower;
      payback.counterparty = lender;
      payback.amount_x = s3->amount;
      pending.push_back({fn_index, s1->origin, 1, payback});
    }

    std::vector<std::pair<const FlowPredicate*, const FlowPredicate*>> swaps;
    find_swaps(fn->body, state, consumed, swaps);
    for (auto [s1, s2] : swaps) {
      // Orient the edge from the attacker's side when the attacker is the
      // second party of the exchange.
      const FlowPredicate* give = s1;
      const FlowPredicate* take = s2;
      if (s1->dst == p.attacker && s1->src != p.attacker) std::swap(give, take);
      const std::string& a = give->src;
      const std::string& b = give->dst;

      Edge e;
      e.src = give->token;
      e.dst = take->token;
      e.op = Op::Swap;
      e.phi = swap_phi(give->token, take->token, a, b);
      e.function = fn->id();
      e.statements = {s1->origin, s2->origin};
      e.actor = a;
      e.counterparty = b;
      e.amount_x = give->amount;
      e.amount_y = take->amount;
      pending.push_back({fn_index, s1->origin, 0, e});
      if (fn->bidirectional) {
        Edge r = e;
        r.src = e.dst;
        r.dst = e.src;
        r.phi = swap_phi(take->token, give->token, a, b);
        r.mirrored = true;
        std::swap(r.amount_x, r.amount_y);
        pending.push_back({fn_index, s1->origin, 1, r});
      }
    }

    for (const auto& flow : state.entries) {
      if (consumed.contains(flow.origin)) continue;
      bool swapped = false;
      for (auto [s1, s2] : swaps) swapped = swapped || s1 == &flow || s2 == &flow;
      if (swapped) continue;
      Edge e;
      e.function = fn->id();
      e.statements = {flow.origin};
      e.amount_x = flow.amount;
      if (flow.src == kDead) {
        e.src = kEpsilon;
        e.dst = flow.token;
        e.op = Op::Mint;
        e.phi = gain_phi(flow.token, flow.dst);
        e.actor = flow.dst;
      } else if (flow.dst == kDead) {
        e.src = flow.token;
        e.dst = kEpsilon;
        e.op = Op::Burn;
        e.phi = spend_phi(flow.token, flow.src);
        e.actor = flow.src;
      } else {
        e.src = flow.token;
        e.dst = kEpsilon;
        e.op = Op::Transfer;
        e.phi = spend_phi(flow.token, flow.src);
        e.actor = flow.src;
        e.counterparty = flow.dst;
      }
      pending.push_back({fn_index, flow.origin, 0, e});
    }
  }

  std::stable_sort(pending.begin(), pending.end(), [](const auto& l, const auto& r) {
    return std::tie(l.fn_index, l.anchor, l.rank) < std::tie(r.fn_index, r.anchor, r.rank);
  });

  std::vector<Edge> edges;
  std::map<Op, std::map<std::string, int>> ordinals;
  for (auto& pe : pending) {
    Edge e = std::move(pe.edge);
    e.id = edges.size();
    auto& by_fn = ordinals[e.op == Op::Payback ? Op::Borrow : e.op];
    auto [slot, inserted] = by_fn.try_emplace(e.function, static_cast<int>(by_fn.size()) + 1);
    e.ordinal = slot->second;
    edges.push_back(std::move(e));
  }
  return edges;
}

TokenFlowGraph build_tfg(const ir::ProtocolIR& p) {
  TokenFlowGraph g;
  for (const auto& t : p.tokens) g.nodes.push_back(t.id);
  g.nodes.push_back(kEpsilon);

  std::map<std::string, FlowState> states;
  for (const auto* f : p.all_functions()) {
    if (f->is_public() || f->visibility == ir::Visibility::Hook) {
      for (const auto& s : f->body) {
        if (std::holds_alternative<ir::Call>(s.kind)) {
          throw Error("NotInlined", f->id(), "build_tfg expects an inlined protocol", s.pos);
        }
      }
      states.emplace(f->id(), infer_flows(*f, p));
    }
  }
  g.edges = infer_edges(states, p);
  return g;
}

EdgeConstraint standard_phi(Op op, const std::string& in, const std::string& out,
                            const std::string& actor, const std::string& counterparty) {
  EdgeConstraint phi;
  switch (op) {
    case Op::Swap:
      return swap_phi(in, out, actor, counterparty);
    case Op::Borrow:
    case Op::Mint:
      phi = gain_phi(out, actor);
      break;
    case Op::Payback:
    case Op::Burn:
    case Op::Transfer:
      phi = spend_phi(in, actor);
      break;
  }
  if (op != Op::Mint && op != Op::Burn) phi.omitted = "constraints on " + counterparty + " omitted";
  return phi;
}

nlohmann::json to_json(const TokenFlowGraph& g) {
  nlohmann::json j;
  j["nodes"] = g.nodes;
  j["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges) {
    nlohmann::json je{{"id", e.id},
                      {"label", e.label()},
                      {"op", std::string(to_string(e.op))},
                      {"src", e.src},
                      {"dst", e.dst},
                      {"phi", e.phi.render()},
                      {"actor", e.actor},
                      {"counterparty", e.counterparty},
                      {"mirrored", e.mirrored},
                      {"provenance", {{"function", e.function}, {"statements", e.statements}}}};
    j["edges"].push_back(std::move(je));
  }
  return j;
}

std::string to_dot(const TokenFlowGraph& g) {
  std::ostringstream out;
  out << "digraph tfg {\n";
  for (const auto& n : g.nodes) out << "  \"" << n << "\";\n";
  for (const auto& e : g.edges) {
    out << "  \"" << e.src << "\" -> \"" << e.dst << "\" [label=\"" << e.label()
        << "\", tooltip=\"" << e.function << ": " << e.phi.render() << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace foray::tfg
