#include "foray/afl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace foray::afl {

namespace {

void collect(const Amount& a, std::vector<Hole>& out) {
  if (const auto* h = std::get_if<Hole>(&a)) out.push_back(*h);
}

Amount fresh(int& next_hole) { return Hole{next_hole++}; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

Amount parse_amount(const std::string& text) {
  static const std::string diamond = "◇";
  std::string digits;
  if (text.rfind(diamond, 0) == 0) {
    digits = text.substr(diamond.size());
  } else if (!text.empty() && text[0] == '?') {
    digits = text.substr(1);
  } else {
    return parse_rational(text);
  }
  if (digits.empty() ||
      !std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); })) {
    throw Error("SyntaxError", text, "malformed hole");
  }
  return Hole{std::stoi(digits)};
}

Rational settle(const Rational& v, bool round_up) {
  return Rational(round_up ? ceil_rational(v) : floor_rational(v));
}

}  // namespace

bool is_hole(const Amount& a) { return std::holds_alternative<Hole>(a); }

std::string render(const Amount& a) {
  if (const auto* h = std::get_if<Hole>(&a)) return h->display();
  return format_rational(std::get<Rational>(a));
}

std::vector<Hole> Op::holes() const {
  std::vector<Hole> out;
  collect(amount, out);
  if (kind == OpKind::Swap) collect(min_out, out);
  return out;
}

std::string Op::spent_token() const {
  switch (kind) {
    case OpKind::Swap: return src_token;
    case OpKind::Transfer:
    case OpKind::Burn:
    case OpKind::Payback: return token;
    default: return {};
  }
}

std::string Op::gained_token() const {
  switch (kind) {
    case OpKind::Swap: return tgt_token;
    case OpKind::Mint:
    case OpKind::Borrow: return token;
    default: return {};
  }
}

std::string render(const Op& op) {
  std::ostringstream out;
  out << tfg::to_string(op.kind) << "(";
  switch (op.kind) {
    case OpKind::Transfer:
      out << "token: " << op.token << ", from: " << op.from << ", to: " << op.to
          << ", amt: " << render(op.amount);
      break;
    case OpKind::Burn:
      out << "token: " << op.token << ", from: " << op.from << ", amt: " << render(op.amount);
      break;
    case OpKind::Mint:
      out << "token: " << op.token << ", to: " << op.to << ", amt: " << render(op.amount);
      break;
    case OpKind::Swap:
      out << "market: " << op.market << ", src: " << op.src_token << ", tgt: " << op.tgt_token
          << ", in: " << render(op.amount) << ", minout: " << render(op.min_out)
          << ", to: " << op.to;
      break;
    case OpKind::Borrow:
    case OpKind::Payback:
      out << "lender: " << op.market << ", token: " << op.token
          << ", amt: " << render(op.amount);
      break;
  }
  out << ")";
  return out.str();
}

std::vector<Op> ops_from_path(const std::vector<const tfg::Edge*>& path, int& next_hole) {
  std::vector<Op> ops;
  for (const auto* e : path) {
    Op op;
    op.kind = e->op;
    switch (e->op) {
      case OpKind::Borrow:
        op.market = e->counterparty;
        op.token = e->dst;
        op.to = e->actor;
        op.amount = fresh(next_hole);
        break;
      case OpKind::Payback:
        op.market = e->counterparty;
        op.token = e->src;
        op.from = e->actor;
        op.amount = fresh(next_hole);
        break;
      case OpKind::Swap:
        op.market = e->counterparty;
        op.src_token = e->src;
        op.tgt_token = e->dst;
        op.to = e->actor;
        op.amount = fresh(next_hole);
        op.min_out = fresh(next_hole);
        break;
      case OpKind::Mint:
        op.token = e->dst;
        op.to = e->actor;
        op.amount = fresh(next_hole);
        break;
      case OpKind::Burn:
        op.token = e->src;
        op.from = e->actor;
        op.amount = fresh(next_hole);
        break;
      case OpKind::Transfer:
        op.token = e->src;
        op.from = e->actor;
        op.to = e->counterparty;
        op.amount = fresh(next_hole);
        break;
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

std::map<std::size_t, std::size_t> loan_pairs(const std::vector<Op>& ops) {
  std::map<std::size_t, std::size_t> pairs;
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Op& op = ops[i];
    if (op.kind == OpKind::Borrow) {
      open.push_back(i);
    } else if (op.kind == OpKind::Payback) {
      if (open.empty()) {
        throw Error("UnpairedBorrow", op.market, "payback at op " + std::to_string(i + 1) +
                                                     " has no open loan");
      }
      const Op& borrow = ops[open.back()];
      if (borrow.market != op.market || borrow.token != op.token) {
        throw Error("UnpairedBorrow", op.market,
                    "payback at op " + std::to_string(i + 1) + " does not close the innermost loan");
      }
      pairs[i] = open.back();
      open.pop_back();
    }
  }
  if (!open.empty()) {
    throw Error("UnpairedBorrow", ops[open.back()].market,
                "loan opened at op " + std::to_string(open.back() + 1) + " is never paid back");
  }
  return pairs;
}

bool loans_paired(const std::vector<Op>& ops) {
  try {
    loan_pairs(ops);
    return true;
  } catch (const Error&) {
    return false;
  }
}

AttackSketch sketch_from_path(const std::vector<const tfg::Edge*>& path) {
  if (path.empty()) throw Error("EmptyPath", "", "a sketch needs at least one edge");
  AttackSketch sk;
  int next_hole = 1;
  sk.ops = ops_from_path(path, next_hole);
  loan_pairs(sk.ops);
  for (const auto& op : sk.ops) {
    for (const auto& h : op.holes()) sk.holes.insert(h);
  }
  for (const auto* e : path) sk.source_path.push_back(e->id);
  return sk;
}

AttackProgram complete(const AttackSketch& sketch, const Model& model) {
  AttackProgram prog;
  auto fill = [&](Amount& a, bool round_up) {
    const auto* h = std::get_if<Hole>(&a);
    if (!h) return;
    auto it = model.find(h->smt_name());
    if (it == model.end()) throw Error("UnboundHole", h->display(), "model has no value");
    if (it->second < 0) {
      throw Error("InvariantViolation", h->display(),
                  "negative amount " + format_rational(it->second));
    }
    Rational v = settle(it->second, round_up);
    prog.binding[*h] = v;
    a = v;
  };
  for (Op op : sketch.ops) {
    fill(op.amount, op.kind == OpKind::Payback);
    if (op.kind == OpKind::Swap) {
      fill(op.min_out, false);
      if (op.src_token == op.tgt_token) {
        throw Error("InvariantViolation", op.market, "swap source and target coincide");
      }
    }
    prog.ops.push_back(std::move(op));
  }
  return prog;
}

std::string render(const AttackSketch& sketch) {
  std::string out;
  for (const auto& op : sketch.ops) out += render(op) + "\n";
  return out;
}

std::string render(const AttackProgram& program) {
  std::string out;
  for (const auto& op : program.ops) out += render(op) + "\n";
  return out;
}

std::vector<Op> parse_ops(std::string_view text) {
  static const std::map<std::string, OpKind> kinds{
      {"transfer", OpKind::Transfer}, {"mint", OpKind::Mint},     {"burn", OpKind::Burn},
      {"swap", OpKind::Swap},         {"borrow", OpKind::Borrow}, {"payback", OpKind::Payback}};
  std::vector<Op> ops;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    SourcePos pos{line_no, 1};
    auto open = line.find('(');
    if (open == std::string::npos || line.back() != ')') {
      throw Error("SyntaxError", line, "expected op(field: value, ...)", pos);
    }
    auto kind = kinds.find(trim(line.substr(0, open)));
    if (kind == kinds.end()) throw Error("SyntaxError", line.substr(0, open), "unknown op", pos);
    Op op;
    op.kind = kind->second;
    std::map<std::string, std::string> fields;
    std::istringstream args(line.substr(open + 1, line.size() - open - 2));
    std::string field;
    while (std::getline(args, field, ',')) {
      auto colon = field.find(':');
      if (colon == std::string::npos) throw Error("SyntaxError", field, "expected name: value", pos);
      fields[trim(field.substr(0, colon))] = trim(field.substr(colon + 1));
    }
    auto take = [&](const std::string& name) {
      auto it = fields.find(name);
      if (it == fields.end()) {
        throw Error("SyntaxError", name, "missing field for " + kind->first, pos);
      }
      std::string v = it->second;
      fields.erase(it);
      return v;
    };
    switch (op.kind) {
      case OpKind::Transfer:
        op.token = take("token");
        op.from = take("from");
        op.to = take("to");
        op.amount = parse_amount(take("amt"));
        break;
      case OpKind::Burn:
        op.token = take("token");
        op.from = take("from");
        op.amount = parse_amount(take("amt"));
        break;
      case OpKind::Mint:
        op.token = take("token");
        op.to = take("to");
        op.amount = parse_amount(take("amt"));
        break;
      case OpKind::Swap:
        op.market = take("market");
        op.src_token = take("src");
        op.tgt_token = take("tgt");
        op.amount = parse_amount(take("in"));
        op.min_out = parse_amount(take("minout"));
        op.to = take("to");
        if (op.src_token == op.tgt_token) {
          throw Error("InvariantViolation", op.market, "swap source and target coincide", pos);
        }
        break;
      case OpKind::Borrow:
      case OpKind::Payback:
        op.market = take("lender");
        op.token = take("token");
        op.amount = parse_amount(take("amt"));
        break;
    }
    if (!fields.empty()) {
      throw Error("SyntaxError", fields.begin()->first, "unexpected field", pos);
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

AttackProgram parse_program(std::string_view text) {
  AttackProgram p;
  p.ops = parse_ops(text);
  for (const auto& op : p.ops) {
    if (!op.holes().empty()) {
      throw Error("UnboundHole", op.holes().front().display(), "programs must be concrete");
    }
  }
  return p;
}

}  // namespace foray::afl
