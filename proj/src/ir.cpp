#include "foray/ir.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace foray::ir {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Line {
  std::string text;  // comment stripped, trimmed
  int number = 0;
  int column = 1;    // column of the first non-blank character
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  int number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    ++number;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    std::size_t first = 0;
    while (first < raw.size() && std::isspace(static_cast<unsigned char>(raw[first]))) ++first;
    std::string trimmed = trim(raw);
    if (!trimmed.empty()) {
      out.push_back({trimmed, number, static_cast<int>(first) + 1});
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

/// Cursor over a single line.
class Lexer {
 public:
  explicit Lexer(const Line& line) : line_(line) {}

  SourcePos pos() const {
    return {line_.number, line_.column + static_cast<int>(p_)};
  }

  void skip_ws() {
    while (p_ < s().size() && std::isspace(static_cast<unsigned char>(s()[p_]))) ++p_;
  }

  bool eof() {
    skip_ws();
    return p_ >= s().size();
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::string near = p_ < s().size() ? std::string(s().substr(p_)) : "end of line";
    throw Error("SyntaxError", near, what, pos());
  }

  std::string ident() {
    skip_ws();
    if (p_ >= s().size() || !is_ident_start(s()[p_])) fail("expected identifier");
    std::size_t b = p_;
    while (p_ < s().size() && is_ident_char(s()[p_])) ++p_;
    return std::string(s().substr(b, p_ - b));
  }

  /// Identifier or unsigned integer literal.
  std::string term() {
    skip_ws();
    if (p_ < s().size() && std::isdigit(static_cast<unsigned char>(s()[p_]))) {
      std::size_t b = p_;
      while (p_ < s().size() && std::isdigit(static_cast<unsigned char>(s()[p_]))) ++p_;
      return std::string(s().substr(b, p_ - b));
    }
    return ident();
  }

  int integer() {
    skip_ws();
    std::size_t b = p_;
    while (p_ < s().size() && std::isdigit(static_cast<unsigned char>(s()[p_]))) ++p_;
    if (b == p_) fail("expected integer");
    return std::stoi(std::string(s().substr(b, p_ - b)));
  }

  bool accept(char c) {
    skip_ws();
    if (p_ < s().size() && s()[p_] == c) {
      ++p_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  bool accept_word(std::string_view word) {
    skip_ws();
    if (s().substr(p_, word.size()) != word) return false;
    std::size_t after = p_ + word.size();
    if (after < s().size() && is_ident_char(s()[after])) return false;
    p_ = after;
    return true;
  }

  std::string rest() {
    skip_ws();
    std::string r = trim(s().substr(p_));
    p_ = s().size();
    return r;
  }

  void expect_end() {
    if (!eof()) fail("unexpected trailing input");
  }

 private:
  std::string_view s() const { return line_.text; }
  const Line& line_;
  std::size_t p_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lines_(split_lines(text)) {}

  ProtocolIR parse() {
    ProtocolIR p;
    while (i_ < lines_.size()) {
      const Line& line = lines_[i_];
      Lexer lex(line);
      if (lex.accept_word("attacker")) {
        p.attacker = lex.ident();
        lex.expect_end();
        ++i_;
      } else if (lex.accept_word("token")) {
        p.tokens.push_back(parse_token(lex, line));
        ++i_;
      } else if (lex.accept_word("contract")) {
        std::string name = lex.ident();
        lex.expect_end();
        ++i_;
        p.contracts.push_back(parse_contract(name, line));
      } else {
        lex.fail("expected 'attacker', 'token' or 'contract'");
      }
    }
    return p;
  }

 private:
  TokenDecl parse_token(Lexer& lex, const Line& line) {
    TokenDecl t;
    t.pos = {line.number, line.column};
    t.id = lex.ident();
    while (!lex.eof()) {
      if (lex.accept_word("decimals")) {
        t.decimals = lex.integer();
      } else if (lex.accept_word("stablecoin")) {
        t.is_stablecoin = true;
      } else if (lex.accept_word("minters")) {
        do {
          t.authorized_minters.insert(lex.ident());
        } while (lex.accept(','));
      } else {
        lex.fail("expected 'decimals', 'stablecoin' or 'minters'");
      }
    }
    return t;
  }

  ContractDecl parse_contract(const std::string& name, const Line& header) {
    ContractDecl c;
    c.name = name;
    c.pos = {header.number, header.column};
    while (true) {
      if (i_ >= lines_.size()) {
        throw Error("SyntaxError", name, "contract is missing 'end'",
                    {header.number, header.column});
      }
      const Line& line = lines_[i_];
      Lexer lex(line);
      if (lex.accept_word("end")) {
        lex.expect_end();
        ++i_;
        return c;
      }
      if (!lex.accept_word("function")) lex.fail("expected 'function' or 'end'");
      ++i_;
      c.functions.push_back(parse_function(lex, line, name));
    }
  }

  FunctionDecl parse_function(Lexer& lex, const Line& line,
                              const std::string& owner) {
    FunctionDecl f;
    f.owner = owner;
    f.pos = {line.number, line.column};
    f.name = lex.ident();
    lex.expect('(');
    if (!lex.accept(')')) {
      do {
        Param param;
        param.name = lex.ident();
        lex.expect(':');
        std::string kind = lex.ident();
        if (kind == "amount") {
          param.kind = ParamKind::Amount;
        } else if (kind == "address") {
          param.kind = ParamKind::Address;
        } else if (kind == "token") {
          param.kind = ParamKind::Token;
        } else {
          lex.fail("parameter kind must be amount, address or token");
        }
        f.params.push_back(std::move(param));
      } while (lex.accept(','));
      lex.expect(')');
    }
    if (lex.accept_word("public")) {
      f.visibility = Visibility::Public;
    } else if (lex.accept_word("internal")) {
      f.visibility = Visibility::Internal;
    } else if (lex.accept_word("hook")) {
      f.visibility = Visibility::Hook;
    } else {
      lex.fail("expected visibility: public, internal or hook");
    }
    if (lex.accept_word("bidirectional")) f.bidirectional = true;
    lex.expect_end();

    std::string terminator;
    f.body = parse_block(terminator);
    if (terminator != "end") {
      throw Error("SyntaxError", f.name, "function is missing 'end'", f.pos);
    }
    return f;
  }

  /// Parses statements until `end` or `else`, consuming the terminator line.
  std::vector<Statement> parse_block(std::string& terminator) {
    std::vector<Statement> body;
    while (i_ < lines_.size()) {
      const Line& line = lines_[i_];
      Lexer lex(line);
      if (lex.accept_word("end")) {
        lex.expect_end();
        ++i_;
        terminator = "end";
        return body;
      }
      if (lex.accept_word("else")) {
        lex.expect_end();
        ++i_;
        terminator = "else";
        return body;
      }
      body.push_back(parse_statement(lex, line));
    }
    terminator.clear();
    return body;
  }

  Statement parse_statement(Lexer& lex, const Line& line) {
    Statement stmt;
    stmt.id = next_id_++;
    stmt.pos = {line.number, line.column};
    ++i_;
    if (lex.accept_word("if")) {
      Branch branch;
      branch.condition = lex.rest();
      if (branch.condition.empty()) lex.fail("branch condition is empty");
      std::string terminator;
      branch.then_body = parse_block(terminator);
      if (terminator == "else") {
        branch.else_body = parse_block(terminator);
      }
      if (terminator != "end") {
        throw Error("SyntaxError", "if", "branch is missing 'end'", stmt.pos);
      }
      stmt.kind = std::move(branch);
      return stmt;
    }
    if (lex.accept_word("callback")) {
      Callback cb;
      cb.handle = qualified_name(lex);
      lex.expect_end();
      stmt.kind = std::move(cb);
      return stmt;
    }
    if (lex.accept_word("call")) {
      Call call;
      call.callee = qualified_name(lex);
      lex.expect('(');
      if (!lex.accept(')')) {
        do {
          call.args.push_back(lex.term());
        } while (lex.accept(','));
        lex.expect(')');
      }
      lex.expect_end();
      stmt.kind = std::move(call);
      return stmt;
    }
    if (lex.accept_word("let")) {
      Let let;
      let.name = lex.ident();
      lex.expect('=');
      let.expr = lex.rest();
      if (let.expr.empty()) lex.fail("let needs an expression");
      stmt.kind = std::move(let);
      return stmt;
    }

    std::string token = lex.ident();
    lex.expect('.');
    std::string method = lex.ident();
    lex.expect('(');
    if (method == "transferFrom") {
      TransferFrom s{token, lex.term(), {}, {}};
      lex.expect(',');
      s.to = lex.term();
      lex.expect(',');
      s.amount = lex.term();
      stmt.kind = std::move(s);
    } else if (method == "transfer") {
      TransferTo s{token, lex.term(), {}};
      lex.expect(',');
      s.amount = lex.term();
      stmt.kind = std::move(s);
    } else if (method == "mint") {
      Mint s{token, lex.term(), {}};
      lex.expect(',');
      s.amount = lex.term();
      stmt.kind = std::move(s);
    } else if (method == "burn") {
      Burn s{token, lex.term(), {}};
      lex.expect(',');
      s.amount = lex.term();
      stmt.kind = std::move(s);
    } else {
      throw Error("SyntaxError", method,
                  "unknown token method (expected transferFrom, transfer, mint, burn)",
                  stmt.pos);
    }
    lex.expect(')');
    lex.expect_end();
    return stmt;
  }

  static std::string qualified_name(Lexer& lex) {
    std::string name = lex.ident();
    if (lex.accept('.')) name += "." + lex.ident();
    return name;
  }

  std::vector<Line> lines_;
  std::size_t i_ = 0;
  StmtId next_id_ = 1;
};

class Validator {
 public:
  explicit Validator(const ProtocolIR& p) : p_(p) {}

  std::vector<Diagnostic> run() {
    std::set<std::string> seen_tokens;
    for (const auto& t : p_.tokens) {
      if (t.id.empty()) add("EmptyTokenId", t.id, "token id is empty", {}, t.pos);
      if (!seen_tokens.insert(t.id).second) {
        add("DuplicateToken", t.id, "token declared twice", {}, t.pos);
      }
      if (t.decimals < 0 || t.decimals > 30) {
        add("InvalidDecimals", t.id, "decimals must be within 0..30", {}, t.pos);
      }
    }
    std::set<std::string> seen_contracts;
    for (const auto& c : p_.contracts) {
      if (!seen_contracts.insert(c.name).second) {
        add("DuplicateContract", c.name, "contract declared twice", {}, c.pos);
      }
    }
    for (const auto& t : p_.tokens) {
      for (const auto& m : t.authorized_minters) {
        if (!p_.contract(m)) {
          add("UndeclaredContract", m, "minter of " + t.id + " is not a contract", {}, t.pos);
        }
      }
    }
    for (const auto& c : p_.contracts) {
      std::set<std::string> names;
      for (const auto& f : c.functions) {
        if (!names.insert(f.name).second) {
          add("DuplicateFunction", c.name + "." + f.name,
              "function declared twice in " + c.name, {}, f.pos);
        }
        for_each_statement(f.body, [&](const Statement& s) { check(s, f); });
      }
    }
    return std::move(out_);
  }

 private:
  void add(std::string code, std::string subject, std::string message,
           std::optional<StmtId> stmt, SourcePos pos) {
    out_.push_back({std::move(code), std::move(subject), std::move(message), stmt, pos});
  }

  void check_token(const std::string& token, const Statement& s, const FunctionDecl& f) {
    if (p_.token(token)) return;
    if (const Param* param = f.param(token); param && param->kind == ParamKind::Token) return;
    add("UndeclaredToken", token, "token is not declared", s.id, s.pos);
  }

  void check_address(const std::string& addr, const Statement& s, const FunctionDecl& f) {
    if (addr == "this" || addr == "caller" || addr == p_.attacker) return;
    if (p_.contract(addr)) return;
    if (const Param* param = f.param(addr); param && param->kind == ParamKind::Address) return;
    add("UndeclaredContract", addr, "address is neither a contract nor an address parameter",
        s.id, s.pos);
  }

  void check_minter(const std::string& token, const Statement& s, const FunctionDecl& f) {
    const TokenDecl* t = p_.token(token);
    if (t && !t->authorized_minters.contains(f.owner)) {
      add("UnauthorizedMint", token, f.owner + " is not an authorized minter of " + token,
          s.id, s.pos);
    }
  }

  void check(const Statement& s, const FunctionDecl& f) {
    if (!ids_.insert(s.id).second) {
      add("DuplicateStatementId", std::to_string(s.id), "statement id reused", s.id, s.pos);
    }
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, TransferFrom>) {
            check_token(k.token, s, f);
            check_address(k.from, s, f);
            check_address(k.to, s, f);
          } else if constexpr (std::is_same_v<T, TransferTo>) {
            check_token(k.token, s, f);
            check_address(k.to, s, f);
          } else if constexpr (std::is_same_v<T, Mint>) {
            check_token(k.token, s, f);
            check_address(k.to, s, f);
            check_minter(k.token, s, f);
          } else if constexpr (std::is_same_v<T, Burn>) {
            check_token(k.token, s, f);
            check_address(k.from, s, f);
            check_minter(k.token, s, f);
          } else if constexpr (std::is_same_v<T, Callback>) {
            const FunctionDecl* hook = p_.function(k.handle, f.owner);
            if (!hook) {
              add("UndeclaredFunction", k.handle, "callback target is not declared", s.id, s.pos);
            } else if (hook->visibility != Visibility::Hook) {
              add("CallbackNotHook", k.handle, "callback target must be declared 'hook'", s.id,
                  s.pos);
            }
          } else if constexpr (std::is_same_v<T, Call>) {
            const FunctionDecl* callee = p_.function(k.callee, f.owner);
            if (!callee) {
              add("UndeclaredFunction", k.callee, "called function is not declared", s.id, s.pos);
            } else if (callee->params.size() != k.args.size()) {
              add("ArityMismatch", k.callee,
                  "expected " + std::to_string(callee->params.size()) + " arguments", s.id,
                  s.pos);
            }
          }
        },
        s.kind);
  }

  const ProtocolIR& p_;
  std::vector<Diagnostic> out_;
  std::set<StmtId> ids_;
};

StmtId max_statement_id(const ProtocolIR& p) {
  StmtId m = 0;
  for (const auto* f : p.all_functions()) {
    for_each_statement(f->body, [&](const Statement& s) { m = std::max(m, s.id); });
  }
  for (const auto& [k, v] : p.provenance) m = std::max(m, k);
  return m;
}

class Inliner {
 public:
  Inliner(const ProtocolIR& source, int max_depth)
      : src_(source), max_depth_(max_depth), next_id_(max_statement_id(source) + 1) {}

  ProtocolIR run() {
    ProtocolIR out = src_;
    for (auto& c : out.contracts) {
      for (auto& f : c.functions) {
        const FunctionDecl* original = src_.function(f.name, c.name);
        top_owner_ = c.name;
        f.body = expand(original->body, *original, 0, {}, out.provenance);
      }
    }
    return out;
  }

 private:
  using Subst = std::map<std::string, std::string>;

  static std::string apply(const Subst& subst, const std::string& term) {
    auto it = subst.find(term);
    return it == subst.end() ? term : it->second;
  }

  std::vector<Statement> expand(const std::vector<Statement>& body, const FunctionDecl& fn,
                                int depth, const Subst& subst,
                                std::map<StmtId, StmtId>& provenance) {
    std::vector<Statement> out;
    for (const auto& stmt : body) {
      if (const auto* call = std::get_if<Call>(&stmt.kind)) {
        const FunctionDecl* callee = src_.function(call->callee, fn.owner);
        if (!callee) {
          throw Error("UndeclaredFunction", call->callee, "cannot inline unknown function",
                      stmt.pos);
        }
        if (depth + 1 > max_depth_) {
          throw Error("InlineDepthExceeded", callee->id(),
                      "call chain exceeds inline bound after " + std::to_string(max_depth_) +
                          " expansions",
                      stmt.pos);
        }
        Subst inner;
        for (std::size_t i = 0; i < callee->params.size() && i < call->args.size(); ++i) {
          inner[callee->params[i].name] = apply(subst, call->args[i]);
        }
        // After inlining, `this` resolves against the entry function's owner.
        if (callee->owner != top_owner_) inner["this"] = callee->owner;
        auto expanded = expand(callee->body, *callee, depth + 1, inner, provenance);
        for (auto& s : expanded) out.push_back(std::move(s));
        continue;
      }
      Statement copy = stmt;
      if (depth > 0) {
        copy.id = next_id_++;
        auto origin = src_.provenance.find(stmt.id);
        provenance[copy.id] = origin == src_.provenance.end() ? stmt.id : origin->second;
      }
      std::visit(
          [&](auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, TransferFrom>) {
              k.token = apply(subst, k.token);
              k.from = apply(subst, k.from);
              k.to = apply(subst, k.to);
              k.amount = apply(subst, k.amount);
            } else if constexpr (std::is_same_v<T, TransferTo> || std::is_same_v<T, Mint>) {
              k.token = apply(subst, k.token);
              k.to = apply(subst, k.to);
              k.amount = apply(subst, k.amount);
            } else if constexpr (std::is_same_v<T, Burn>) {
              k.token = apply(subst, k.token);
              k.from = apply(subst, k.from);
              k.amount = apply(subst, k.amount);
            } else if constexpr (std::is_same_v<T, Branch>) {
              k.then_body = expand(std::get<Branch>(stmt.kind).then_body, fn, depth, subst,
                                   provenance);
              k.else_body = expand(std::get<Branch>(stmt.kind).else_body, fn, depth, subst,
                                   provenance);
            }
          },
          copy.kind);
      out.push_back(std::move(copy));
    }
    return out;
  }

  const ProtocolIR& src_;
  int max_depth_;
  StmtId next_id_;
  std::string top_owner_;
};

void write_body(std::ostringstream& out, const std::vector<Statement>& body, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& stmt : body) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, TransferFrom>) {
            out << pad << k.token << ".transferFrom(" << k.from << ", " << k.to << ", "
                << k.amount << ")\n";
          } else if constexpr (std::is_same_v<T, TransferTo>) {
            out << pad << k.token << ".transfer(" << k.to << ", " << k.amount << ")\n";
          } else if constexpr (std::is_same_v<T, Mint>) {
            out << pad << k.token << ".mint(" << k.to << ", " << k.amount << ")\n";
          } else if constexpr (std::is_same_v<T, Burn>) {
            out << pad << k.token << ".burn(" << k.from << ", " << k.amount << ")\n";
          } else if constexpr (std::is_same_v<T, Branch>) {
            out << pad << "if " << k.condition << "\n";
            write_body(out, k.then_body, indent + 2);
            if (!k.else_body.empty()) {
              out << pad << "else\n";
              write_body(out, k.else_body, indent + 2);
            }
            out << pad << "end\n";
          } else if constexpr (std::is_same_v<T, Callback>) {
            out << pad << "callback " << k.handle << "\n";
          } else if constexpr (std::is_same_v<T, Call>) {
            out << pad << "call " << k.callee << "(";
            for (std::size_t i = 0; i < k.args.size(); ++i) {
              out << (i ? ", " : "") << k.args[i];
            }
            out << ")\n";
          } else if constexpr (std::is_same_v<T, Let>) {
            out << pad << "let " << k.name << " = " << k.expr << "\n";
          }
        },
        stmt.kind);
  }
}

nlohmann::json statement_json(const Statement& stmt) {
  nlohmann::json j;
  j["id"] = stmt.id;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, TransferFrom>) {
          j["kind"] = "transferFrom";
          j["token"] = k.token;
          j["from"] = k.from;
          j["to"] = k.to;
          j["amount"] = k.amount;
        } else if constexpr (std::is_same_v<T, TransferTo>) {
          j["kind"] = "transfer";
          j["token"] = k.token;
          j["to"] = k.to;
          j["amount"] = k.amount;
        } else if constexpr (std::is_same_v<T, Mint>) {
          j["kind"] = "mint";
          j["token"] = k.token;
          j["to"] = k.to;
          j["amount"] = k.amount;
        } else if constexpr (std::is_same_v<T, Burn>) {
          j["kind"] = "burn";
          j["token"] = k.token;
          j["from"] = k.from;
          j["amount"] = k.amount;
        } else if constexpr (std::is_same_v<T, Branch>) {
          j["kind"] = "branch";
          j["condition"] = k.condition;
          j["then"] = nlohmann::json::array();
          j["else"] = nlohmann::json::array();
          for (const auto& s : k.then_body) j["then"].push_back(statement_json(s));
          for (const auto& s : k.else_body) j["else"].push_back(statement_json(s));
        } else if constexpr (std::is_same_v<T, Callback>) {
          j["kind"] = "callback";
          j["handle"] = k.handle;
        } else if constexpr (std::is_same_v<T, Call>) {
          j["kind"] = "call";
          j["callee"] = k.callee;
          j["args"] = k.args;
        } else if constexpr (std::is_same_v<T, Let>) {
          j["kind"] = "let";
          j["name"] = k.name;
          j["expr"] = k.expr;
        }
      },
      stmt.kind);
  return j;
}

}  // namespace

const Param* FunctionDecl::param(std::string_view n) const {
  for (const auto& p : params) {
    if (p.name == n) return &p;
  }
  return nullptr;
}

const TokenDecl* ProtocolIR::token(std::string_view id) const {
  for (const auto& t : tokens) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

const ContractDecl* ProtocolIR::contract(std::string_view name) const {
  for (const auto& c : contracts) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const FunctionDecl* ProtocolIR::function(std::string_view name,
                                         std::string_view scope) const {
  std::string_view owner = scope;
  std::string_view fn = name;
  if (auto dot = name.find('.'); dot != std::string_view::npos) {
    owner = name.substr(0, dot);
    fn = name.substr(dot + 1);
  }
  const ContractDecl* c = contract(owner);
  if (!c) return nullptr;
  for (const auto& f : c->functions) {
    if (f.name == fn) return &f;
  }
  return nullptr;
}

std::set<std::string> ProtocolIR::stablecoins() const {
  std::set<std::string> out;
  for (const auto& t : tokens) {
    if (t.is_stablecoin) out.insert(t.id);
  }
  return out;
}

std::vector<const FunctionDecl*> ProtocolIR::entry_functions() const {
  std::vector<const FunctionDecl*> out;
  for (const auto& c : contracts) {
    for (const auto& f : c.functions) {
      if (f.is_public()) out.push_back(&f);
    }
  }
  return out;
}

std::vector<const FunctionDecl*> ProtocolIR::all_functions() const {
  std::vector<const FunctionDecl*> out;
  for (const auto& c : contracts) {
    for (const auto& f : c.functions) out.push_back(&f);
  }
  return out;
}

ProtocolIR parse_protocol_unchecked(std::string_view text) {
  return Parser(text).parse();
}

ProtocolIR parse_protocol(std::string_view text) {
  ProtocolIR p = parse_protocol_unchecked(text);
  auto diagnostics = validate_protocol(p);
  if (!diagnostics.empty()) {
    const auto& d = diagnostics.front();
    throw Error(d.code, d.subject, d.message, d.pos);
  }
  return p;
}

std::vector<Diagnostic> validate_protocol(const ProtocolIR& protocol) {
  return Validator(protocol).run();
}

ProtocolIR inline_calls(const ProtocolIR& protocol, int max_depth) {
  if (max_depth < 0) throw Error("InvalidArgument", "inline-depth", "must be non-negative");
  return Inliner(protocol, max_depth).run();
}

std::string serialize_protocol(const ProtocolIR& p) {
  std::ostringstream out;
  out << "attacker " << p.attacker << "\n";
  for (const auto& t : p.tokens) {
    out << "token " << t.id << " decimals " << t.decimals;
    if (t.is_stablecoin) out << " stablecoin";
    if (!t.authorized_minters.empty()) {
      out << " minters ";
      bool first = true;
      for (const auto& m : t.authorized_minters) {
        out << (first ? "" : ", ") << m;
        first = false;
      }
    }
    out << "\n";
  }
  for (const auto& c : p.contracts) {
    out << "\ncontract " << c.name << "\n";
    for (const auto& f : c.functions) {
      out << "  function " << f.name << "(";
      for (std::size_t i = 0; i < f.params.size(); ++i) {
        out << (i ? ", " : "") << f.params[i].name << ": " << to_string(f.params[i].kind);
      }
      out << ") " << to_string(f.visibility);
      if (f.bidirectional) out << " bidirectional";
      out << "\n";
      write_body(out, f.body, 4);
      out << "  end\n";
    }
    out << "end\n";
  }
  return out.str();
}

nlohmann::json to_json(const ProtocolIR& p) {
  nlohmann::json j;
  j["attacker"] = p.attacker;
  j["tokens"] = nlohmann::json::array();
  for (const auto& t : p.tokens) {
    j["tokens"].push_back({{"id", t.id},
                           {"decimals", t.decimals},
                           {"stablecoin", t.is_stablecoin},
                           {"minters", t.authorized_minters}});
  }
  j["contracts"] = nlohmann::json::array();
  for (const auto& c : p.contracts) {
    nlohmann::json jc{{"name", c.name}, {"functions", nlohmann::json::array()}};
    for (const auto& f : c.functions) {
      nlohmann::json jf{{"name", f.name},
                        {"visibility", to_string(f.visibility)},
                        {"bidirectional", f.bidirectional},
                        {"params", nlohmann::json::array()},
                        {"body", nlohmann::json::array()}};
      for (const auto& prm : f.params) {
        jf["params"].push_back({{"name", prm.name}, {"kind", to_string(prm.kind)}});
      }
      for (const auto& s : f.body) jf["body"].push_back(statement_json(s));
      jc["functions"].push_back(std::move(jf));
    }
    j["contracts"].push_back(std::move(jc));
  }
  nlohmann::json prov = nlohmann::json::object();
  for (const auto& [k, v] : p.provenance) prov[std::to_string(k)] = v;
  j["provenance"] = std::move(prov);
  return j;
}

std::string resolve_address(std::string_view term, const FunctionDecl& fn,
                            const ProtocolIR& protocol) {
  if (term == "this") return fn.owner;
  if (term == "caller") return protocol.attacker;
  return std::string(term);
}

std::string_view to_string(Visibility v) {
  switch (v) {
    case Visibility::Public: return "public";
    case Visibility::Internal: return "internal";
    case Visibility::Hook: return "hook";
  }
  return "public";
}

std::string_view to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Amount: return "amount";
    case ParamKind::Address: return "address";
    case ParamKind::Token: return "token";
  }
  return "amount";
}

}  // namespace foray::ir
