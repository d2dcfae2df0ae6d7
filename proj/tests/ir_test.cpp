#include "foray/ir.hpp"
#include "support/generators.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

using namespace foray;
using namespace foray::ir;

namespace {

Error parse_error(const std::string& text) {
  try {
    parse_protocol(text);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse error";
  return Error("none", "");
}

std::size_t count_calls(const ProtocolIR& p) {
  std::size_t n = 0;
  for (const auto* f : p.all_functions()) {
    for_each_statement(f->body, [&](const Statement& s) {
      n += std::holds_alternative<Call>(s.kind) ? 1 : 0;
    });
  }
  return n;
}

std::set<StmtId> statement_ids(const ProtocolIR& p) {
  std::set<StmtId> ids;
  for (const auto* f : p.all_functions()) {
    for_each_statement(f->body, [&](const Statement& s) { ids.insert(s.id); });
  }
  return ids;
}

}  // namespace

TEST(ParseProtocol, Mumug) {
  ProtocolIR p = parse_protocol(support::read_fixture("mumug.ir"));
  EXPECT_EQ(p.tokens.size(), 2u);
  EXPECT_EQ(p.contracts.size(), 3u);
  ASSERT_EQ(p.entry_functions().size(), 3u);
  EXPECT_EQ(p.entry_functions()[0]->id(), "DeFiLender.flashloan");
  EXPECT_EQ(p.entry_functions()[1]->id(), "Mubank.mu_bond");
  EXPECT_EQ(p.entry_functions()[2]->id(), "Pair.swap");
  EXPECT_EQ(p.stablecoins(), std::set<std::string>{"USDCe"});
  EXPECT_EQ(p.token("USDCe")->decimals, 6);
  EXPECT_TRUE(p.token("MU")->authorized_minters.contains("Mubank"));
  EXPECT_TRUE(validate_protocol(p).empty());
}

TEST(ParseProtocol, TokenOnly) {
  ProtocolIR p = parse_protocol("token DAI decimals 18 stablecoin\n");
  EXPECT_EQ(p.tokens.size(), 1u);
  EXPECT_TRUE(p.all_functions().empty());
}

TEST(ParseProtocol, UndeclaredToken) {
  Error e = parse_error(
      "token A\ncontract C\n  function f(x: amount) public\n    XYZ.transfer(caller, x)\n"
      "  end\nend\n");
  EXPECT_EQ(e.code(), "UndeclaredToken");
  EXPECT_EQ(e.subject(), "XYZ");
  EXPECT_EQ(e.pos().line, 4);
}

TEST(ParseProtocol, UndeclaredContract) {
  Error e = parse_error(
      "token A\ncontract C\n  function f(x: amount) public\n    A.transfer(Nowhere, x)\n"
      "  end\nend\n");
  EXPECT_EQ(e.code(), "UndeclaredContract");
  EXPECT_EQ(e.subject(), "Nowhere");
}

TEST(ParseProtocol, SyntaxErrorCarriesPosition) {
  Error e = parse_error("token A\ncontract C\n  function f(x: amount) public\n    A.transfer(caller x)\n");
  EXPECT_EQ(e.code(), "SyntaxError");
  EXPECT_EQ(e.pos().line, 4);
  EXPECT_GT(e.pos().column, 5);
}

TEST(ParseProtocol, MissingEnd) {
  EXPECT_EQ(parse_error("contract C\n  function f() public\n").code(), "SyntaxError");
}

TEST(ParseProtocol, DuplicateToken) {
  EXPECT_EQ(parse_error("token A\ntoken A\n").code(), "DuplicateToken");
}

TEST(ParseProtocol, Deterministic) {
  std::string text = support::read_fixture("mumug.ir");
  EXPECT_EQ(parse_protocol(text), parse_protocol(text));
}

TEST(ParseProtocol, BranchArms) {
  ProtocolIR p = parse_protocol(
      "token A\ncontract C\n  function f(x: amount) public\n    if x > 5\n"
      "      A.transfer(caller, x)\n    else\n      A.transferFrom(caller, this, x)\n"
      "    end\n  end\nend\n");
  const auto& body = p.function("C.f")->body;
  ASSERT_EQ(body.size(), 1u);
  const auto& br = std::get<Branch>(body[0].kind);
  EXPECT_EQ(br.condition, "x > 5");
  EXPECT_EQ(br.then_body.size(), 1u);
  EXPECT_EQ(br.else_body.size(), 1u);
  EXPECT_EQ(statement_ids(p), (std::set<StmtId>{1, 2, 3}));
}

TEST(ValidateProtocol, MumugIsClean) {
  EXPECT_TRUE(validate_protocol(parse_protocol_unchecked(support::read_fixture("mumug.ir"))).empty());
}

TEST(ValidateProtocol, UnauthorizedMint) {
  ProtocolIR p = parse_protocol_unchecked(
      "token A minters Bank\ncontract Bank\nend\ncontract Thief\n"
      "  function f(x: amount) public\n    A.mint(caller, x)\n  end\nend\n");
  auto d = validate_protocol(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].code, "UnauthorizedMint");
  ASSERT_TRUE(d[0].statement.has_value());
  EXPECT_EQ(*d[0].statement, 1u);
}

TEST(ValidateProtocol, DuplicateFunction) {
  ProtocolIR p = parse_protocol_unchecked(
      "token A\ncontract Pair\n  function swap(x: amount) public\n  end\n"
      "  function swap(y: amount) public\n  end\nend\n");
  auto d = validate_protocol(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].code, "DuplicateFunction");
  EXPECT_EQ(d[0].subject, "Pair.swap");
}

TEST(ValidateProtocol, CallbackMustNameHook) {
  ProtocolIR p = parse_protocol_unchecked(
      "token A\ncontract L\n  function loan(x: amount) public\n    callback g\n  end\n"
      "  function g(r: amount) public\n  end\nend\n");
  auto d = validate_protocol(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].code, "CallbackNotHook");
}

TEST(InlineCalls, MuBondQuoteIsInlined) {
  ProtocolIR p = parse_protocol(support::read_fixture("mumug.ir"));
  ProtocolIR q = inline_calls(p);
  const auto& body = q.function("Mubank.mu_bond")->body;
  ASSERT_EQ(body.size(), 3u);
  const auto* let = std::get_if<Let>(&body[1].kind);
  ASSERT_NE(let, nullptr);
  EXPECT_EQ(let->name, "quote");
  EXPECT_EQ(count_calls(q), 0u);
  // The copy has a fresh id that maps back to the helper's statement.
  const auto& helper = p.function("Mubank._mu_bond_quote")->body;
  EXPECT_FALSE(statement_ids(p).contains(body[1].id));
  EXPECT_EQ(q.provenance.at(body[1].id), helper[0].id);
}

TEST(InlineCalls, IdentityWithoutCalls) {
  ProtocolIR p = parse_protocol(
      "token A\ncontract C\n  function f(x: amount) public\n    A.transfer(caller, x)\n"
      "  end\nend\n");
  EXPECT_EQ(inline_calls(p), p);
}

TEST(InlineCalls, ArgumentsAndThisAreSubstituted) {
  ProtocolIR p = parse_protocol(
      "token A\ncontract C\n  function f(x: amount) public\n    call D.pay(x)\n  end\nend\n"
      "contract D\n  function pay(amt: amount) internal\n    A.transfer(caller, amt)\n"
      "    A.transferFrom(caller, this, 7)\n  end\nend\n");
  ProtocolIR q = inline_calls(p);
  const auto& body = q.function("C.f")->body;
  ASSERT_EQ(body.size(), 2u);
  EXPECT_EQ(std::get<TransferTo>(body[0].kind).amount, "x");
  EXPECT_EQ(std::get<TransferFrom>(body[1].kind).to, "D");
}

TEST(InlineCalls, MutualRecursionStopsAtBound) {
  // f -> a -> b -> a -> b: the fourth expansion exceeds K = 3.
  std::string text =
      "token A\ncontract C\n  function f(x: amount) public\n    call a(x)\n  end\n"
      "  function a(x: amount) internal\n    call b(x)\n  end\n"
      "  function b(x: amount) internal\n    call a(x)\n  end\nend\n";
  ProtocolIR p = parse_protocol(text);
  try {
    inline_calls(p, 3);
    FAIL() << "expected InlineDepthExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "InlineDepthExceeded");
    EXPECT_NE(e.detail().find("after 3 expansions"), std::string::npos);
  }
}

TEST(InlineCalls, ChainAtBoundSucceeds) {
  // Three nested helpers need exactly three expansions; a fourth fails.
  std::string three =
      "token A\ncontract C\n  function f(x: amount) public\n    call a(x)\n  end\n"
      "  function a(x: amount) internal\n    call b(x)\n  end\n"
      "  function b(x: amount) internal\n    call c(x)\n  end\n"
      "  function c(x: amount) internal\n    A.transfer(caller, x)\n  end\nend\n";
  ProtocolIR q = inline_calls(parse_protocol(three), 3);
  EXPECT_EQ(q.function("C.f")->body.size(), 1u);
  EXPECT_THROW(inline_calls(parse_protocol(three), 2), Error);
}

TEST(ProtocolJson, MumugShape) {
  auto j = to_json(parse_protocol(support::read_fixture("mumug.ir")));
  EXPECT_EQ(j["tokens"].size(), 2u);
  EXPECT_EQ(j["contracts"][1]["functions"][0]["body"][0]["kind"], "transferFrom");
}

TEST(ProtocolProperties, RoundTripInlineAndDiagnostics) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    SCOPED_TRACE("seed " + std::to_string(seed));
    std::string text = support::random_protocol(seed);
    ProtocolIR p = parse_protocol(text);

    // parse ∘ serialize is the identity.
    ASSERT_EQ(parse_protocol(serialize_protocol(p)), p);

    // Inlining is idempotent and removes every call.
    ProtocolIR once = inline_calls(p);
    ASSERT_EQ(inline_calls(once), once);
    ASSERT_EQ(count_calls(once), 0u);

    // Statement ids are unique after inlining too.
    std::size_t total = 0;
    for (const auto* f : once.all_functions()) {
      for_each_statement(f->body, [&](const Statement&) { ++total; });
    }
    ASSERT_EQ(statement_ids(once).size(), total);
  }
}

TEST(ProtocolProperties, DiagnosticsReferenceExistingStatements) {
  // Corrupt each generated protocol by renaming a token inside bodies.
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    SCOPED_TRACE("seed " + std::to_string(seed));
    ProtocolIR p = parse_protocol(support::random_protocol(seed));
    p.tokens.erase(p.tokens.begin());
    auto ids = statement_ids(p);
    for (const auto& d : validate_protocol(p)) {
      if (d.statement) ASSERT_TRUE(ids.contains(*d.statement)) << d.code;
    }
  }
}
