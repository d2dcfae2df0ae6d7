#pragma once

// Abstract financial language: operations over tokens and addresses, with
// amount holes for sketches.

#include "foray/model.hpp"
#include "foray/tfg.hpp"

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace foray::afl {

struct Hole {
  int ordinal = 0;

  std::string smt_name() const { return "h" + std::to_string(ordinal); }
  std::string display() const { return "◇" + std::to_string(ordinal); }
  auto operator<=>(const Hole&) const = default;
};

using Amount = std::variant<Rational, Hole>;

bool is_hole(const Amount& a);
std::string render(const Amount& a);

using OpKind = tfg::Op;

/// One operation. Field use by kind:
///   transfer(token, from, to, amount)   burn(token, from, amount)
///   mint(token, to, amount)             borrow/payback(market=lender, token, amount)
///   swap(market, src_token, tgt_token, amount=in, min_out, to)
struct Op {
  OpKind kind = OpKind::Transfer;
  std::string token;
  std::string from;
  std::string to;
  std::string market;
  std::string src_token;
  std::string tgt_token;
  Amount amount = Rational(0);
  Amount min_out = Rational(0);

  std::vector<Hole> holes() const;
  /// Token leaving the actor, if any.
  std::string spent_token() const;
  /// Token reaching the actor, if any.
  std::string gained_token() const;

  bool operator==(const Op&) const = default;
};

std::string render(const Op& op);

struct AttackSketch {
  std::vector<Op> ops;
  std::set<Hole> holes;
  std::vector<std::size_t> source_path;  // edge ids

  bool operator==(const AttackSketch&) const = default;
};

struct AttackProgram {
  std::vector<Op> ops;
  std::map<Hole, Rational> binding;

  bool operator==(const AttackProgram&) const = default;
};

/// One op per edge with fresh holes, without checking loan pairing.
std::vector<Op> ops_from_path(const std::vector<const tfg::Edge*>& path, int& next_hole);

/// Throws UnpairedBorrow when a borrow has no later payback on the same
/// lender and token, or a payback has no open borrow.
AttackSketch sketch_from_path(const std::vector<const tfg::Edge*>& path);

/// True when every borrow is closed by a later payback (stack discipline).
bool loans_paired(const std::vector<Op>& ops);

/// For each payback index, the index of the borrow it closes.
std::map<std::size_t, std::size_t> loan_pairs(const std::vector<Op>& ops);

/// Substitutes model values for holes. Amounts are settled in whole base
/// units: everything rounds down except payback amounts, which round up so
/// the loan stays covered. Throws UnboundHole or InvariantViolation.
AttackProgram complete(const AttackSketch& sketch, const Model& model);

std::string render(const AttackSketch& sketch);
std::string render(const AttackProgram& program);

/// Parses the rendering above (one op per line; holes as ◇N or ?N).
std::vector<Op> parse_ops(std::string_view text);

AttackProgram parse_program(std::string_view text);

}  // namespace foray::afl
