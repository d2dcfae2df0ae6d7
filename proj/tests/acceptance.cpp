// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include "foray/cnstgen.hpp"
#include "foray/sim.hpp"
#include "foray/tfg.hpp"
#include "support/testing.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace foray;

namespace {

struct Check {
  bool ok = true;
  std::string why;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

struct Output {
  int code = -1;
  std::string out;
  double seconds = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Output shell(const std::string& cmd) {
  Output o;
  auto start = std::chrono::steady_clock::now();
  std::string full = std::string("cd ") + FORAY_SOURCE_DIR + " && FORAY_SOLVER_MODE=replay " + cmd + " 2>/dev/null";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
  int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return o;
}

const std::string kReplay = " --transcripts fixtures/transcripts --solver-mode replay";

std::string cli() { return FORAY_CLI; }

Check mumug_end_to_end() {
  Check c;
  auto o = shell(cli() + " synth --protocol fixtures/mumug.ir --state fixtures/mumug.state --auto-goals" + kReplay);
  c.expect(o.code == 0, "exit code " + std::to_string(o.code));
  c.expect(o.seconds < 60, "took " + std::to_string(o.seconds) + " s");
  if (!c.ok) return c;
  auto j = nlohmann::json::parse(o.out);
  c.expect(j["outcome"] == "attack", "no attack");
  if (!c.ok) return c;
  std::string text;
  for (const auto& line : j["program"]) text += line.get<std::string>() + "\n";
  auto program = afl::parse_program(text);
  std::vector<afl::OpKind> kinds;
  for (const auto& op : program.ops) kinds.push_back(op.kind);
  c.expect(kinds == std::vector<afl::OpKind>{afl::OpKind::Borrow, afl::OpKind::Swap, afl::OpKind::Swap,
                                            afl::OpKind::Payback},
           "op sequence is not borrow, swap, swap, payback");
  auto s0 = support::load_state("mumug.state");
  auto v = sim::validate(program, s0, goal::profit_goal("USDCe", "attacker"));
  c.expect(v.pass, "simulator rejects the program: " + v.reason);
  c.expect(v.end.balance("USDCe", "attacker") > s0.balance("USDCe", "attacker"), "no USDCe profit");
  return c;
}

Check constraint_count() {
  Check c;
  auto p = support::load_protocol("mumug.ir");
  auto g = tfg::build_tfg(p);
  auto s0 = support::load_state("mumug.state");
  auto sk = afl::sketch_from_path({&g.edges[0], &g.edges[3], &g.edges[2], &g.edges[1]});
  auto cs = cnstgen::compile_sketch(s0, sk, goal::generate_goals(p)[0], {}, cnstgen::market_model(s0));
  c.expect(cs.atoms.size() <= 300, std::to_string(cs.atoms.size()) + " atoms");
  c.expect(cs.atoms.size() == 82, std::to_string(cs.atoms.size()) + " atoms, golden 82");
  return c;
}

Check patched_exhausts() {
  Check c;
  auto o = shell(cli() + " synth --protocol fixtures/mumug_patched.ir --state fixtures/mumug_patched.state --auto-goals" +
                 kReplay);
  c.expect(o.code == 2, "exit code " + std::to_string(o.code));
  c.expect(o.seconds < 120, "took " + std::to_string(o.seconds) + " s");
  if (!c.ok) return c;
  auto j = nlohmann::json::parse(o.out);
  c.expect(j["outcome"] == "exhausted", "outcome " + j["outcome"].dump());
  c.expect(j["program"].is_null(), "a program was returned");
  return c;
}

Check tfg_golden() {
  Check c;
  auto g = tfg::build_tfg(support::load_protocol("mumug.ir"));
  std::multiset<std::string> nodes(g.nodes.begin(), g.nodes.end());
  c.expect(nodes == std::multiset<std::string>{"MU", "USDCe", tfg::kEpsilon}, "node set");
  std::multiset<std::string> edges;
  for (const auto& e : g.edges) {
    edges.insert(std::string(tfg::to_string(e.op)) + " " + e.src + "->" + e.dst + " via " + e.counterparty);
  }
  std::multiset<std::string> want{
      "borrow ε->MU via DeFiLender", "payback MU->ε via DeFiLender", "swap USDCe->MU via Mubank",
      "swap MU->USDCe via Pair", "swap USDCe->MU via Pair",
  };
  c.expect(edges == want, "edge multiset");
  return c;
}

Check properties() {
  Check c;
  struct Suite {
    std::string binary;
    std::string filter;
  };
  const std::vector<Suite> suites{
      {FORAY_SIM_TEST, "Property.TransferOnlyConservation:Property.PoolProductMonotone:Property.AtomicRevert:"
                       "Property.FeeFreeLoanIsNeutral"},
      {FORAY_SKETCH_TEST, "Property.SearchMatchesBruteForce"},
      {FORAY_SOLVER_TEST, "Property.UnsatCoreSoundness:Property.BlockedModelNeverReappears"},
      {FORAY_TFG_TEST, "TfgProperties.FlowPartition"},
  };
  for (const auto& s : suites) {
    auto o = shell(s.binary + " --gtest_filter=" + s.filter);
    c.expect(o.code == 0, fs::path(s.binary).filename().string() + " " + s.filter);
    std::size_t expected = 1 + static_cast<std::size_t>(std::count(s.filter.begin(), s.filter.end(), ':'));
    c.expect(o.out.find("[  PASSED  ] " + std::to_string(expected) + " test") != std::string::npos,
             "not every property ran: " + s.filter);
  }
  return c;
}

// gtest JSON reports minus wall-clock fields.
nlohmann::json normalized(nlohmann::json j) {
  if (j.is_object()) {
    for (const char* key : {"timestamp", "time"}) j.erase(key);
    for (auto& [k, v] : j.items()) v = normalized(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = normalized(v);
  }
  return j;
}

Check determinism() {
  Check c;
  fs::path dir = fs::temp_directory_path() / ("foray-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::string> binaries{FORAY_IR_TEST, FORAY_TFG_TEST,    FORAY_AFL_TEST,
                                          FORAY_GOAL_TEST, FORAY_SOLVER_TEST, FORAY_SIM_TEST,
                                          FORAY_CNSTGEN_TEST, FORAY_SKETCH_TEST, FORAY_SYNTH_TEST};
  const std::vector<std::string> reports{
      " synth --no-timing --protocol fixtures/mumug.ir --state fixtures/mumug.state" + kReplay,
      " synth --no-timing --protocol fixtures/mumug_patched.ir --state fixtures/mumug_patched.state" + kReplay,
      " sketch --protocol fixtures/mumug.ir --state fixtures/mumug.state --format json" + kReplay,
      " graph --protocol fixtures/mumug.ir --format json",
      " validate --protocol fixtures/mumug.ir --state fixtures/mumug.state --program fixtures/mumug_exploit.afl",
  };
  std::vector<std::string> runs[2];
  for (int round = 0; round < 2; ++round) {
    for (std::size_t i = 0; i < binaries.size(); ++i) {
      fs::path out = dir / (std::to_string(round) + "-" + std::to_string(i) + ".json");
      shell(binaries[i] + " --gtest_output=json:" + out.string());
      std::string text = slurp(out);
      runs[round].push_back(text.empty() ? std::string("missing") : normalized(nlohmann::json::parse(text)).dump());
    }
    for (const auto& args : reports) runs[round].push_back(shell(cli() + args).out);
  }
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    c.expect(runs[0][i] != "missing", "no report from run " + std::to_string(i));
    c.expect(runs[0][i] == runs[1][i], "report " + std::to_string(i) + " differs between runs");
  }
  fs::remove_all(dir);
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"1 mumug end-to-end attack", mumug_end_to_end},
      {"2 constraint count scale", constraint_count},
      {"3 patched bank has no attack", patched_exhausts},
      {"4 token flow graph golden", tfg_golden},
      {"5 property suites", properties},
      {"6 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why = e.what();
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << (c.ok ? "" : ": " + c.why) << std::endl;
    if (!c.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
