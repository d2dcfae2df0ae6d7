#pragma once

// SMT-LIB2 client for an external solver process, with content-addressed
// transcripts so test runs can replay recorded answers without a solver.

#include "foray/smt.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

namespace foray::solver {

enum class Status { Sat, Unsat, Unknown };

std::string_view to_string(Status s);

struct Result {
  Status status = Status::Unknown;
  Model model;                  // Sat: every declared unknown
  std::set<std::string> core;   // Unsat: asserted names
  std::string reason;           // Unknown: solver's explanation
  bool replayed = false;
};

/// Live: always ask the solver. Record: ask and store. Replay: stored
/// answers only. Auto: stored answer when present, else ask and store.
enum class Mode { Live, Record, Replay, Auto };

Mode parse_mode(std::string_view text);
std::string_view to_string(Mode m);

/// SHA-256 of `text`, lowercase hex.
std::string content_hash(std::string_view text);

class TranscriptStore {
 public:
  virtual ~TranscriptStore() = default;
  virtual std::optional<std::string> lookup(const std::string& hash) = 0;
  virtual void record(const std::string& hash, const std::string& query,
                      const std::string& reply) = 0;
  virtual void flush() {}
};

/// `<hash>.smt2` and `<hash>.reply` files in one directory.
class DirectoryStore : public TranscriptStore {
 public:
  explicit DirectoryStore(std::string dir);
  std::optional<std::string> lookup(const std::string& hash) override;
  void record(const std::string& hash, const std::string& query,
              const std::string& reply) override;

 private:
  std::string dir_;
};

/// Single file of `hash reply` lines (reply escaped), sorted by hash.
/// Written back on flush() and on destruction when changed.
class BundleStore : public TranscriptStore {
 public:
  explicit BundleStore(std::string path);
  ~BundleStore() override;
  std::optional<std::string> lookup(const std::string& hash) override;
  void record(const std::string& hash, const std::string& query,
              const std::string& reply) override;
  void flush() override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
  bool dirty_ = false;
};

struct Stats {
  std::size_t queries = 0;
  std::size_t sat = 0;
  std::size_t unsat = 0;
  std::size_t unknown = 0;
  std::size_t replayed = 0;
  std::size_t restarts = 0;
  double wall_ms = 0;
};

struct SessionOptions {
  std::string command = "z3 -in";
  Mode mode = Mode::Auto;
  std::shared_ptr<TranscriptStore> store;
  int timeout_ms = 0;  // per query; 0 = no limit
  /// Re-check models against the constraints before returning them.
  bool verify_models = true;
};

/// Reads FORAY_SOLVER_CMD and FORAY_SOLVER_MODE over the given defaults.
SessionOptions options_from_env(SessionOptions defaults = {});

/// One solver process driven over its standard streams. Each check() is an
/// isolated query (the solver is reset first). Single owner; restartable.
class Session {
 public:
  explicit Session(SessionOptions options = options_from_env());
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// `timeout_ms` < 0 uses the session default. Throws SolverUnavailable,
  /// TranscriptMissing (replay) or ProtocolError.
  Result check(const smt::ConstraintSet& cs, int timeout_ms = -1);

  const Stats& stats() const { return stats_; }
  const SessionOptions& options() const { return options_; }

 private:
  std::string ask(const std::string& query, int timeout_ms);
  void start();
  void stop();
  void send(const std::string& text);
  /// Reads until the sentinel line; nullopt when the deadline passes.
  std::optional<std::string> read_until_sentinel(std::chrono::steady_clock::time_point deadline);

  SessionOptions options_;
  Stats stats_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

/// Turns a stored or live reply into a Result for `cs`.
Result parse_reply(const std::string& reply, const smt::ConstraintSet& cs);

/// `cs` plus one atom excluding `m`: some unknown differs from its value in
/// `m` (radius 0) or lies more than `radius` away from it.
smt::ConstraintSet block_model(const smt::ConstraintSet& cs, const Model& m,
                               const Rational& radius = 0, const std::string& name = {});

/// The disjunction block_model adds, over the unknowns of `m`.
smt::Expr blocking_clause(const Model& m, const Rational& radius);

/// Re-asserts only the core; true when that is still unsat.
bool core_is_sound(Session& session, const smt::ConstraintSet& cs,
                   const std::set<std::string>& core);

}  // namespace foray::solver
