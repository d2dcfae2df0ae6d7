#pragma once

// Flow predicates and the token flow graph.
//
// A flow predicate records that some amount of a token moves between two
// addresses at one statement. Edges group flows into financial operations
// (swap, borrow/payback, mint, burn, transfer) and carry the balance
// constraints that hold for the firing address.

#include "foray/ir.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace foray::tfg {

/// Node standing for every participant other than the attacker.
inline constexpr const char* kEpsilon = "ε";
/// Address that is the source of minted and the sink of burned tokens.
inline constexpr const char* kDead = "•";

struct FlowPredicate {
  std::string token;
  std::string amount;  // IR amount term
  std::string src;     // resolved address or kDead
  std::string dst;
  ir::StmtId origin = 0;

  bool operator==(const FlowPredicate&) const = default;
};

/// Flows of one function in program order (both branch arms included).
struct FlowState {
  std::string function;  // "Owner.name"
  std::vector<FlowPredicate> entries;

  const FlowPredicate* find(ir::StmtId id) const;
  bool operator==(const FlowState&) const = default;
};

enum class Op { Transfer, Mint, Burn, Swap, Borrow, Payback };

std::string_view to_string(Op op);

/// Amount placeholders of an edge: x is what the actor hands over (or
/// receives, for borrow/mint), y what a swap hands back.
enum class Slot { X, Y };

struct BalanceRef {
  std::string token;
  std::string address;
  bool post = false;  // u′[a] when true

  bool operator==(const BalanceRef&) const = default;
};

enum class Cmp { Ge, Le };

struct Atom {
  BalanceRef lhs;
  Cmp cmp = Cmp::Ge;
  std::variant<BalanceRef, Slot> rhs;

  bool operator==(const Atom&) const = default;
};

struct EdgeConstraint {
  std::vector<Atom> atoms;
  /// Set when recipient-side constraints are left out.
  std::string omitted;

  std::string render() const;
  bool operator==(const EdgeConstraint&) const = default;
};

struct Edge {
  std::size_t id = 0;
  std::string src;  // token id or kEpsilon
  std::string dst;
  Op op = Op::Transfer;
  EdgeConstraint phi;

  std::string function;                 // "Owner.name" that produced the edge
  std::vector<ir::StmtId> statements;   // contributing statements
  bool mirrored = false;                // reverse direction of a bidirectional swap

  std::string actor;         // address whose balances Φ constrains
  std::string counterparty;  // market, lender or recipient
  std::string amount_x;      // IR amount terms behind the slots
  std::string amount_y;

  /// Display index among edges of the same operator (swap¹, swap²...).
  int ordinal = 0;

  /// Token the operation moves away from the actor (swap/transfer/burn/payback).
  std::string in_token() const;
  /// Token the actor gains (swap/borrow/mint).
  std::string out_token() const;
  std::string label() const;

  bool operator==(const Edge&) const = default;
};

struct TokenFlowGraph {
  std::vector<std::string> nodes;  // declared tokens then kEpsilon
  std::vector<Edge> edges;         // edges[i].id == i

  std::vector<const Edge*> out_edges(std::string_view node) const;
  bool has_node(std::string_view node) const;
};

/// Flow predicates of one (inlined) function. `caller` and `this` resolve to
/// the attacker and the owning contract.
FlowState infer_flows(const ir::FunctionDecl& f, const ir::ProtocolIR& p);

/// Edges of every public function, in canonical order. `states` must hold
/// the flow state of each public function and of each hook they register.
std::vector<Edge> infer_edges(const std::map<std::string, FlowState>& states,
                              const ir::ProtocolIR& p);

/// Expects a validated, inlined protocol.
TokenFlowGraph build_tfg(const ir::ProtocolIR& p);

/// Φ an edge of kind `op` carries when `actor` spends `in` and/or gains
/// `out` (kEpsilon where the node is not a token).
EdgeConstraint standard_phi(Op op, const std::string& in, const std::string& out,
                            const std::string& actor, const std::string& counterparty);

nlohmann::json to_json(const TokenFlowGraph& g);
std::string to_dot(const TokenFlowGraph& g);

}  // namespace foray::tfg
