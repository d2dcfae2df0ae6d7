#include "foray/solver.hpp"

#include "foray/error.hpp"

#include <openssl/evp.h>

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace foray::solver {

namespace {

constexpr const char* kSentinel = "@@foray-end";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("IOError", p.string(), "cannot write transcript");
  out << text;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      out += s[i + 1] == 'n' ? '\n' : s[i + 1];
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string first_line(const std::string& s) {
  auto nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Sat: return "sat";
    case Status::Unsat: return "unsat";
    case Status::Unknown: return "unknown";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "live") return Mode::Live;
  if (text == "record") return Mode::Record;
  if (text == "replay") return Mode::Replay;
  if (text == "auto") return Mode::Auto;
  throw Error("InvalidArgument", std::string(text), "solver mode must be live, record, replay or auto");
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Live: return "live";
    case Mode::Record: return "record";
    case Mode::Replay: return "replay";
    case Mode::Auto: return "auto";
  }
  return "auto";
}

std::string content_hash(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("HashError", "sha256", "digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

DirectoryStore::DirectoryStore(std::string dir) : dir_(std::move(dir)) {}

std::optional<std::string> DirectoryStore::lookup(const std::string& hash) {
  std::filesystem::path p = std::filesystem::path(dir_) / (hash + ".reply");
  if (!std::filesystem::exists(p)) return std::nullopt;
  return read_file(p);
}

void DirectoryStore::record(const std::string& hash, const std::string& query,
                            const std::string& reply) {
  std::filesystem::create_directories(dir_);
  write_file(std::filesystem::path(dir_) / (hash + ".smt2"), query);
  write_file(std::filesystem::path(dir_) / (hash + ".reply"), reply);
}

BundleStore::BundleStore(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    auto space = line.find(' ');
    if (space == std::string::npos) continue;
    entries_[line.substr(0, space)] = unescape(line.substr(space + 1));
  }
}

BundleStore::~BundleStore() {
  try {
    flush();
  } catch (...) {
  }
}

std::optional<std::string> BundleStore::lookup(const std::string& hash) {
  auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void BundleStore::record(const std::string& hash, const std::string&, const std::string& reply) {
  entries_[hash] = reply;
  dirty_ = true;
}

void BundleStore::flush() {
  if (!dirty_) return;
  std::filesystem::path p(path_);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ostringstream out;
  for (const auto& [hash, reply] : entries_) out << hash << ' ' << escape(reply) << '\n';
  write_file(p, out.str());
  dirty_ = false;
}

SessionOptions options_from_env(SessionOptions defaults) {
  if (const char* cmd = std::getenv("FORAY_SOLVER_CMD"); cmd && *cmd) defaults.command = cmd;
  if (const char* mode = std::getenv("FORAY_SOLVER_MODE"); mode && *mode) {
    defaults.mode = parse_mode(mode);
  }
  return defaults;
}

Session::Session(SessionOptions options) : options_(std::move(options)) {}

Session::~Session() { stop(); }

void Session::start() {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw Error("SolverUnavailable", options_.command, std::strerror(errno));
  }
  pid_t pid = fork();
  if (pid < 0) throw Error("SolverUnavailable", options_.command, std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", ("exec " + options_.command).c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  pending_.clear();
  std::signal(SIGPIPE, SIG_IGN);

  // Fail fast when the command does not speak SMT-LIB.
  send(std::string("(echo \"") + kSentinel + "\")\n");
  auto reply = read_until_sentinel(std::chrono::steady_clock::now() + std::chrono::seconds(20));
  if (!reply) {
    stop();
    throw Error("SolverUnavailable", options_.command, "solver did not answer");
  }
}

void Session::stop() {
  if (pid_ <= 0) return;
  close(to_child_);
  close(from_child_);
  kill(pid_, SIGKILL);
  waitpid(pid_, nullptr, 0);
  pid_ = -1;
  to_child_ = from_child_ = -1;
}

void Session::send(const std::string& text) {
  std::size_t off = 0;
  while (off < text.size()) {
    ssize_t n = write(to_child_, text.data() + off, text.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      stop();
      throw Error("SolverUnavailable", options_.command, std::strerror(err));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> Session::read_until_sentinel(
    std::chrono::steady_clock::time_point deadline) {
  const std::string marker = std::string(kSentinel) + "\n";
  while (true) {
    auto pos = pending_.find(marker);
    if (pos != std::string::npos && (pos == 0 || pending_[pos - 1] == '\n')) {
      std::string out = pending_.substr(0, pos);
      pending_.erase(0, pos + marker.size());
      return out;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    int r = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (r < 0 && errno != EINTR) return std::nullopt;
    if (r <= 0) continue;
    char buf[65536];
    ssize_t n = read(from_child_, buf, sizeof buf);
    if (n <= 0) {
      stop();
      throw Error("SolverUnavailable", options_.command, "solver exited: " + trim(pending_));
    }
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

std::string Session::ask(const std::string& query, int timeout_ms) {
  if (pid_ <= 0) start();
  // The solver's own timeout answers "unknown"; the watchdog only catches a
  // solver that ignores it.
  auto budget = timeout_ms > 0 ? std::chrono::milliseconds(2 * timeout_ms + 5000)
                               : std::chrono::milliseconds(10 * 60 * 1000);
  auto deadline = std::chrono::steady_clock::now() + budget;
  send("(reset)\n" + query + "(echo \"" + kSentinel + "\")\n");
  auto status = read_until_sentinel(deadline);
  if (!status) {
    stop();
    ++stats_.restarts;
    return "unknown\n(:reason-unknown \"watchdog timeout\")\n";
  }
  std::string verdict = trim(*status);
  std::string follow;
  if (verdict == "sat") {
    follow = "(get-model)\n";
  } else if (verdict == "unsat") {
    follow = "(get-unsat-core)\n";
  } else if (verdict == "unknown") {
    follow = "(get-info :reason-unknown)\n";
  } else {
    throw Error("ProtocolError", options_.command, "unexpected reply: " + verdict + "\nquery:\n" + query);
  }
  send(follow + "(echo \"" + kSentinel + "\")\n");
  auto payload = read_until_sentinel(deadline);
  if (!payload) {
    stop();
    ++stats_.restarts;
    return "unknown\n(:reason-unknown \"watchdog timeout\")\n";
  }
  return verdict + "\n" + *payload;
}

Result Session::check(const smt::ConstraintSet& cs, int timeout_ms) {
  if (timeout_ms < 0) timeout_ms = options_.timeout_ms;
  auto t0 = std::chrono::steady_clock::now();
  std::string query = smt::render_query(cs, timeout_ms);
  std::string hash = content_hash(query);

  std::optional<std::string> reply;
  bool replayed = false;
  if (options_.mode == Mode::Replay || options_.mode == Mode::Auto) {
    if (options_.store) reply = options_.store->lookup(hash);
    if (reply) {
      replayed = true;
    } else if (options_.mode == Mode::Replay) {
      throw Error("TranscriptMissing", hash,
                  "no recorded reply for this query; rerun with FORAY_SOLVER_MODE=record");
    }
  }
  if (!reply) {
    reply = ask(query, timeout_ms);
    if (options_.store && options_.mode != Mode::Live) options_.store->record(hash, query, *reply);
  }

  Result r;
  try {
    r = parse_reply(*reply, cs);
  } catch (const Error& e) {
    throw Error("ProtocolError", hash, e.detail() + "\nquery:\n" + query + "\nreply:\n" + *reply);
  }
  r.replayed = replayed;
  if (r.status == Status::Sat && options_.verify_models && !smt::satisfies(cs, r.model)) {
    throw Error("ProtocolError", hash, "model does not satisfy the query\nreply:\n" + *reply);
  }

  ++stats_.queries;
  stats_.replayed += replayed ? 1 : 0;
  switch (r.status) {
    case Status::Sat: ++stats_.sat; break;
    case Status::Unsat: ++stats_.unsat; break;
    case Status::Unknown: ++stats_.unknown; break;
  }
  stats_.wall_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Result parse_reply(const std::string& reply, const smt::ConstraintSet& cs) {
  Result r;
  std::string verdict = trim(first_line(reply));
  std::string payload = reply.size() > verdict.size() ? reply.substr(reply.find('\n') + 1) : "";
  if (verdict == "unknown") {
    r.status = Status::Unknown;
    auto parsed = smt::parse_sexprs(payload);
    if (!parsed.empty() && parsed[0].is_list && parsed[0].list.size() == 2) {
      r.reason = parsed[0].list[1].atom;
      if (r.reason.size() >= 2 && r.reason.front() == '"') r.reason = r.reason.substr(1, r.reason.size() - 2);
    }
    return r;
  }
  auto parsed = smt::parse_sexprs(payload);
  if (parsed.empty() || !parsed[0].is_list) {
    throw Error("ProtocolError", verdict, "expected a list after " + verdict);
  }
  if (verdict == "unsat") {
    r.status = Status::Unsat;
    for (const auto& name : parsed[0].list) {
      if (name.is_list || !cs.atom(name.atom)) {
        throw Error("ProtocolError", name.atom, "core names an unknown assertion");
      }
      r.core.insert(name.atom);
    }
    return r;
  }
  if (verdict != "sat") throw Error("ProtocolError", verdict, "unexpected verdict");
  r.status = Status::Sat;
  const auto& defs = parsed[0].list;
  std::size_t start = (!defs.empty() && !defs[0].is_list && defs[0].atom == "model") ? 1 : 0;
  for (std::size_t i = start; i < defs.size(); ++i) {
    const auto& d = defs[i];
    // (define-fun name () Sort value)
    if (!d.is_list || d.list.size() != 5 || d.list[0].atom != "define-fun") {
      throw Error("ProtocolError", "model", "malformed model entry");
    }
    const std::string& name = d.list[1].atom;
    if (!cs.declared(name)) continue;  // named-assertion booleans and the like
    auto v = smt::rational_value(d.list[4]);
    if (!v) {
      r = Result{};
      r.status = Status::Unknown;
      r.reason = "non-rational model value for " + name;
      return r;
    }
    r.model[name] = *v;
  }
  for (const auto& u : cs.unknowns) r.model.try_emplace(u, Rational(0));
  return r;
}

smt::Expr blocking_clause(const Model& m, const Rational& radius) {
  std::vector<smt::Expr> away;
  for (const auto& [name, value] : m) {
    if (radius == 0) {
      away.push_back(smt::negate(smt::eq(smt::var(name), smt::num(value))));
    } else {
      away.push_back(smt::lt(smt::var(name), smt::num(value - radius)));
      away.push_back(smt::gt(smt::var(name), smt::num(value + radius)));
    }
  }
  return smt::any_of(std::move(away));
}

smt::ConstraintSet block_model(const smt::ConstraintSet& cs, const Model& m,
                               const Rational& radius, const std::string& name) {
  if (m.empty()) throw Error("InvalidArgument", "model", "cannot block an empty model");
  smt::ConstraintSet out = cs;
  std::string n = name;
  if (n.empty()) {
    int k = 0;
    do {
      n = "block" + std::to_string(k++);
    } while (out.atom(n));
  }
  for (const auto& [var, value] : m) out.declare(var);
  out.add(n, "kb", blocking_clause(m, radius));
  return out;
}

bool core_is_sound(Session& session, const smt::ConstraintSet& cs,
                   const std::set<std::string>& core) {
  return session.check(cs.restrict_to(core)).status == Status::Unsat;
}

}  // namespace foray::solver
