#include "support/testing.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace foray::support {

std::string fixture_path(const std::string& name) {
  return std::string(FORAY_SOURCE_DIR) + "/fixtures/" + name;
}

std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ir::ProtocolIR load_protocol(const std::string& name) {
  return ir::inline_calls(ir::parse_protocol(read_fixture(name)));
}

sim::ChainState load_state(const std::string& name) { return sim::load_state(read_fixture(name)); }

std::unique_ptr<solver::Session> session(const std::string& bundle) {
  auto o = solver::options_from_env();
  o.store = std::make_shared<solver::BundleStore>(std::string(FORAY_SOURCE_DIR) + "/tests/transcripts/" +
                                                  bundle + ".bundle");
  return std::make_unique<solver::Session>(o);
}

std::unique_ptr<solver::Session> fixture_session() {
  auto o = solver::options_from_env();
  o.store = std::make_shared<solver::DirectoryStore>(std::string(FORAY_SOURCE_DIR) + "/fixtures/transcripts");
  return std::make_unique<solver::Session>(o);
}

}  // namespace foray::support
