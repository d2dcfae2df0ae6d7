// foray: token flow graphs, attack sketches and attack synthesis from the
// command line.

#include "foray/afl.hpp"
#include "foray/cnstgen.hpp"
#include "foray/error.hpp"
#include "foray/goal.hpp"
#include "foray/ir.hpp"
#include "foray/sim.hpp"
#include "foray/sketch.hpp"
#include "foray/solver.hpp"
#include "foray/synth.hpp"
#include "foray/tfg.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace foray;

enum Exit {
  kFound = 0,
  kFail = 1,
  kExhausted = 2,
  kUsage = 64,
  kData = 65,
  kUnavailable = 69,
  kSoftware = 70,
};

struct Config {
  std::string protocol;
  std::string state;
  std::string goal_file;
  std::string program;
  bool auto_goals = false;
  std::string format;
  std::string report;
  bool timing = true;
  int inline_depth = ir::kDefaultInlineDepth;

  std::string solver_cmd;
  std::string solver_mode;
  std::string transcripts;

  std::size_t max_depth = 5;
  std::size_t max_sketches = 64;
  std::size_t models_per_sketch = 16;
  int probe_timeout_ms = 10000;
  int solve_timeout_ms = 5000;
  std::string radius = "0";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("FileNotFound", path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ir::ProtocolIR load_protocol(const Config& c) {
  return ir::inline_calls(ir::parse_protocol(read_file(c.protocol)), c.inline_depth);
}

std::vector<goal::Goal> load_goals(const Config& c, const ir::ProtocolIR& p) {
  if (c.goal_file.empty()) return goal::generate_goals(p);
  std::vector<goal::Goal> out;
  std::istringstream in(read_file(c.goal_file));
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(goal::resolve(goal::parse_goal(line), p));
  }
  if (out.empty()) throw Error("EmptyGoal", c.goal_file, "no goal in file");
  return out;
}

std::unique_ptr<solver::Session> open_session(const Config& c) {
  solver::SessionOptions o = solver::options_from_env();
  if (!c.solver_cmd.empty()) o.command = c.solver_cmd;
  if (!c.solver_mode.empty()) o.mode = solver::parse_mode(c.solver_mode);
  std::string store = c.transcripts;
  if (store.empty()) {
    if (const char* env = std::getenv("FORAY_TRANSCRIPTS")) store = env;
  }
  if (!store.empty()) {
    if (std::filesystem::path(store).extension() == ".bundle") {
      o.store = std::make_shared<solver::BundleStore>(store);
    } else {
      o.store = std::make_shared<solver::DirectoryStore>(store);
    }
  }
  return std::make_unique<solver::Session>(o);
}

void emit(const Config& c, const std::string& text) {
  if (c.report.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(c.report, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("FileNotFound", c.report, "cannot write report");
  out << text;
}

int run_graph(const Config& c) {
  auto g = tfg::build_tfg(load_protocol(c));
  if (c.format == "json") {
    emit(c, tfg::to_json(g).dump(2) + "\n");
  } else {
    emit(c, tfg::to_dot(g));
  }
  return kFound;
}

sketch::SketchBudget sketch_budget(const Config& c) {
  sketch::SketchBudget b;
  b.max_depth = c.max_depth;
  b.max_sketches = c.max_sketches;
  b.probe_timeout_ms = c.probe_timeout_ms;
  return b;
}

int run_sketch(const Config& c) {
  auto p = load_protocol(c);
  auto s0 = sim::load_state(read_file(c.state));
  auto goals = load_goals(c, p);
  auto g = tfg::build_tfg(p);
  auto mm = cnstgen::market_model(s0);
  auto session = open_session(c);
  const goal::Goal& psi = goals.front();
  sketch::SketchSearch search(g, s0, psi, sketch_budget(c), *session);

  nlohmann::json listing = nlohmann::json::array();
  std::ostringstream text;
  text << "# goal: " << goal::render(psi) << "\n";
  std::size_t k = 0;
  while (auto sk = search.next()) {
    auto cs = cnstgen::compile_sketch(s0, *sk, psi, {}, mm);
    std::string path;
    for (auto id : sk->source_path) path += (path.empty() ? "e" : " e") + std::to_string(id);
    if (c.format == "json") {
      listing.push_back({{"index", k}, {"path", sk->source_path}, {"sketch", afl::render(*sk)},
                         {"atoms", cs.atoms.size()}});
    } else {
      text << "\n# sketch " << k << ": " << path << " (" << cs.atoms.size() << " atoms)\n"
           << afl::render(*sk);
    }
    ++k;
  }
  if (c.format == "json") {
    emit(c, nlohmann::json{{"goal", goal::render(psi)}, {"sketches", listing},
                           {"probe_trace", search.trace()}}.dump(2) + "\n");
  } else {
    text << "\n# probes\n";
    for (const auto& line : search.trace()) text << line << "\n";
    emit(c, text.str());
  }
  return k > 0 ? kFound : kExhausted;
}

int run_synth(const Config& c) {
  auto p = load_protocol(c);
  auto s0 = sim::load_state(read_file(c.state));
  auto goals = load_goals(c, p);
  auto session = open_session(c);
  synth::SynthBudget b;
  b.sketch = sketch_budget(c);
  b.models_per_sketch = c.models_per_sketch;
  b.solve_timeout_ms = c.solve_timeout_ms;
  b.initial_radius = parse_rational(c.radius);
  if (b.initial_radius < 0) throw Error("InvalidBudget", c.radius, "radius must be nonnegative");
  auto report = synth::synthesize(p, s0, goals, b, *session);
  if (c.format == "text") {
    std::ostringstream out;
    if (report.found) {
      out << "# attack for " << report.goal << "\n" << afl::render(*report.program);
      for (const auto& [tok, v] : report.profit) out << "# " << tok << " " << format_rational(v) << "\n";
    } else {
      out << "# exhausted after " << report.sketches_tried << " sketches, "
          << report.models_tried << " models\n";
    }
    emit(c, out.str());
  } else {
    emit(c, synth::to_json(report, c.timing).dump(2) + "\n");
  }
  return report.found ? kFound : kExhausted;
}

int run_validate(const Config& c) {
  auto p = load_protocol(c);
  auto s0 = sim::load_state(read_file(c.state));
  auto goals = load_goals(c, p);
  auto program = afl::parse_program(read_file(c.program));
  nlohmann::json verdicts = nlohmann::json::array();
  bool any = false;
  for (const auto& psi : goals) {
    auto v = sim::validate(program, s0, psi);
    auto j = sim::to_json(v);
    j["goal"] = goal::render(psi);
    verdicts.push_back(j);
    any = any || v.pass;
  }
  emit(c, nlohmann::json{{"pass", any}, {"verdicts", verdicts}}.dump(2) + "\n");
  return any ? kFound : kFail;
}

int exit_code(const Error& e) {
  const std::string& code = e.code();
  if (code == "FileNotFound" || code == "InvalidArgument" || code == "InvalidBudget") return kUsage;
  if (code == "SolverUnavailable" || code == "TranscriptMissing") return kUnavailable;
  if (code == "ProtocolError" || code == "InvariantViolation") return kSoftware;
  return kData;
}

void add_solver_flags(CLI::App* app, Config& c) {
  app->add_option("--solver-cmd", c.solver_cmd, "Solver command (default: $FORAY_SOLVER_CMD or 'z3 -in')");
  app->add_option("--solver-mode", c.solver_mode, "live, record, replay or auto")
      ->check(CLI::IsMember({"live", "record", "replay", "auto"}));
  app->add_option("--transcripts", c.transcripts,
                  "Transcript directory, or a .bundle file (default: $FORAY_TRANSCRIPTS)");
}

void add_search_flags(CLI::App* app, Config& c) {
  app->add_option("--state", c.state, "Chain state file")->required();
  auto* goal = app->add_option("--goal", c.goal_file, "Goal file, one goal per line");
  app->add_flag("--auto-goals", c.auto_goals, "Profit goals for every stablecoin (default)")->excludes(goal);
  app->add_option("--max-depth", c.max_depth, "Longest sketch")->check(CLI::PositiveNumber);
  app->add_option("--max-sketches", c.max_sketches, "Sketch budget")->check(CLI::PositiveNumber);
  app->add_option("--probe-timeout-ms", c.probe_timeout_ms, "Per feasibility probe")
      ->check(CLI::PositiveNumber);
  add_solver_flags(app, c);
}

}  // namespace

int main(int argc, char** argv) {
  Config c;
  CLI::App app{"Attack synthesis over token flow graphs"};
  app.require_subcommand(1);
  app.add_option("--report", c.report, "Write output to this file instead of stdout");

  auto* graph = app.add_subcommand("graph", "Print the token flow graph");
  graph->add_option("--protocol", c.protocol, "Protocol IR file")->required();
  graph->add_option("--format", c.format, "dot or json")->check(CLI::IsMember({"dot", "json"}));
  graph->add_option("--inline-depth", c.inline_depth, "Call inlining bound")->check(CLI::PositiveNumber);

  auto* sketch = app.add_subcommand("sketch", "List attack sketches");
  sketch->add_option("--protocol", c.protocol, "Protocol IR file")->required();
  sketch->add_option("--format", c.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  add_search_flags(sketch, c);

  auto* synth = app.add_subcommand("synth", "Synthesize an attack program");
  synth->add_option("--protocol", c.protocol, "Protocol IR file")->required();
  synth->add_option("--format", c.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  synth->add_option("--models-per-sketch", c.models_per_sketch, "Model budget per sketch")
      ->check(CLI::PositiveNumber);
  synth->add_option("--solve-timeout-ms", c.solve_timeout_ms, "Per constraint solve")
      ->check(CLI::PositiveNumber);
  synth->add_option("--radius", c.radius, "Initial blocking radius");
  synth->add_flag("!--no-timing", c.timing, "Leave wall-clock figures out of the report");
  add_search_flags(synth, c);

  auto* validate = app.add_subcommand("validate", "Run a concrete attack program");
  validate->add_option("--protocol", c.protocol, "Protocol IR file")->required();
  validate->add_option("--state", c.state, "Chain state file")->required();
  validate->add_option("--program", c.program, "Attack program file")->required();
  auto* vgoal = validate->add_option("--goal", c.goal_file, "Goal file, one goal per line");
  validate->add_flag("--auto-goals", c.auto_goals, "Profit goals for every stablecoin (default)")
      ->excludes(vgoal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*graph) {
      if (c.format.empty()) c.format = "dot";
      return run_graph(c);
    }
    if (*sketch) {
      if (c.format.empty()) c.format = "text";
      return run_sketch(c);
    }
    if (*synth) {
      if (c.format.empty()) c.format = "json";
      return run_synth(c);
    }
    return run_validate(c);
  } catch (const Error& e) {
    nlohmann::json diag{{"error", e.code()}, {"subject", e.subject()}, {"detail", e.detail()}};
    if (e.pos().valid()) diag["line"] = e.pos().line;
    std::cerr << diag.dump() << "\n";
    return exit_code(e);
  }
}
