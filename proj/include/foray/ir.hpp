#pragma once

// Textual protocol IR: contracts, public entry points, token moves.
//
// The IR is line oriented. A protocol declares its tokens and contracts;
// each contract holds functions whose bodies are sequences of token calls,
// branches, callbacks, helper calls and opaque `let` computations. See
// docs/ir-format.md for the grammar.

#include "foray/error.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace foray::ir {

using StmtId = std::uint32_t;

inline constexpr int kDefaultInlineDepth = 3;

enum class ParamKind { Amount, Address, Token };
enum class Visibility { Public, Internal, Hook };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::Amount;

  bool operator==(const Param&) const = default;
};

struct Statement;

struct TransferFrom {
  std::string token, from, to, amount;
  bool operator==(const TransferFrom&) const = default;
};
struct TransferTo {
  std::string token, to, amount;
  bool operator==(const TransferTo&) const = default;
};
struct Mint {
  std::string token, to, amount;
  bool operator==(const Mint&) const = default;
};
struct Burn {
  std::string token, from, amount;
  bool operator==(const Burn&) const = default;
};
struct Branch {
  std::string condition;
  std::vector<Statement> then_body;
  std::vector<Statement> else_body;
  bool operator==(const Branch&) const;
};
/// Registers `handle` (a hook function) as the callback the current
/// function hands control to.
struct Callback {
  std::string handle;
  bool operator==(const Callback&) const = default;
};
struct Call {
  std::string callee;
  std::vector<std::string> args;
  bool operator==(const Call&) const = default;
};
/// Arithmetic the analysis does not interpret.
struct Let {
  std::string name;
  std::string expr;
  bool operator==(const Let&) const = default;
};

using StatementKind =
    std::variant<TransferFrom, TransferTo, Mint, Burn, Branch, Callback, Call, Let>;

struct Statement {
  StmtId id = 0;
  SourcePos pos;
  StatementKind kind;

  // Source positions are presentation only and do not take part in equality.
  bool operator==(const Statement& other) const {
    return id == other.id && kind == other.kind;
  }
};

inline bool Branch::operator==(const Branch& other) const {
  return condition == other.condition && then_body == other.then_body &&
         else_body == other.else_body;
}

struct FunctionDecl {
  std::string name;
  std::string owner;
  std::vector<Param> params;
  std::vector<Statement> body;
  Visibility visibility = Visibility::Public;
  /// Marks pair-style swap functions that trade in either direction.
  bool bidirectional = false;
  SourcePos pos;

  bool is_public() const { return visibility == Visibility::Public; }
  std::string id() const { return owner + "." + name; }
  const Param* param(std::string_view name) const;

  bool operator==(const FunctionDecl& o) const {
    return name == o.name && owner == o.owner && params == o.params &&
           body == o.body && visibility == o.visibility &&
           bidirectional == o.bidirectional;
  }
};

struct ContractDecl {
  std::string name;
  std::vector<FunctionDecl> functions;
  SourcePos pos;

  bool operator==(const ContractDecl& o) const {
    return name == o.name && functions == o.functions;
  }
};

struct TokenDecl {
  std::string id;
  int decimals = 18;
  std::set<std::string> authorized_minters;
  bool is_stablecoin = false;
  SourcePos pos;

  bool operator==(const TokenDecl& o) const {
    return id == o.id && decimals == o.decimals &&
           authorized_minters == o.authorized_minters &&
           is_stablecoin == o.is_stablecoin;
  }
};

struct ProtocolIR {
  std::string attacker = "attacker";
  std::vector<TokenDecl> tokens;
  std::vector<ContractDecl> contracts;
  /// Inlined statement copies map back to the statement they were cloned
  /// from. Empty until inline_calls runs.
  std::map<StmtId, StmtId> provenance;

  const TokenDecl* token(std::string_view id) const;
  const ContractDecl* contract(std::string_view name) const;
  /// Resolves "fn" relative to `scope` or a qualified "Contract.fn".
  const FunctionDecl* function(std::string_view name,
                               std::string_view scope = {}) const;

  std::set<std::string> stablecoins() const;
  std::vector<const FunctionDecl*> entry_functions() const;
  std::vector<const FunctionDecl*> all_functions() const;

  bool operator==(const ProtocolIR& o) const {
    return attacker == o.attacker && tokens == o.tokens &&
           contracts == o.contracts && provenance == o.provenance;
  }
};

struct Diagnostic {
  std::string code;
  std::string subject;
  std::string message;
  std::optional<StmtId> statement;
  SourcePos pos;
};

/// Syntax only. No reference checks.
ProtocolIR parse_protocol_unchecked(std::string_view text);

/// Syntax plus validation; the first diagnostic becomes the thrown Error.
ProtocolIR parse_protocol(std::string_view text);

std::vector<Diagnostic> validate_protocol(const ProtocolIR& protocol);

/// Replaces every Call by the callee body. Inlined copies receive fresh
/// statement ids recorded in `provenance`. Throws InlineDepthExceeded when
/// a call chain nests deeper than `max_depth`.
ProtocolIR inline_calls(const ProtocolIR& protocol,
                        int max_depth = kDefaultInlineDepth);

std::string serialize_protocol(const ProtocolIR& protocol);

nlohmann::json to_json(const ProtocolIR& protocol);

/// Resolves `this` and `caller` inside `fn` to concrete address names.
std::string resolve_address(std::string_view term, const FunctionDecl& fn,
                            const ProtocolIR& protocol);

/// Calls `visit` on every statement, depth first, in program order.
template <typename Visit>
void for_each_statement(const std::vector<Statement>& body, Visit&& visit) {
  for (const auto& stmt : body) {
    visit(stmt);
    if (const auto* branch = std::get_if<Branch>(&stmt.kind)) {
      for_each_statement(branch->then_body, visit);
      for_each_statement(branch->else_body, visit);
    }
  }
}

std::string_view to_string(Visibility v);
std::string_view to_string(ParamKind k);

}  // namespace foray::ir
