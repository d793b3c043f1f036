#pragma once

// Runs generated candidates as child processes speaking a line-delimited
// JSON ask/tell protocol. The harness owns the objective and the budget;
// the child only ever sees the values it is told.
//
//   harness -> child  {"type":"init","dim":D,"budget":B,"seed":S,"domain":"bool"|"real",
//                      "lb":-5.0,"ub":5.0,"y_opt":Y,"orientation":"max"|"min"}
//   child -> harness  {"type":"ask","x":[...]}
//   harness -> child  {"type":"tell","y":Y,"evals":K,"target_hit":BOOL}
//   harness -> child  {"type":"stop","reason":R}

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bag/error.hpp"
#include "bag/evaluation.hpp"
#include "bag/problems.hpp"
#include "bag/process.hpp"

namespace bag {

struct CandidateSource {
  std::string language_tag = "python";
  std::string source_text;
  std::string entry_name;

  friend bool operator==(const CandidateSource&, const CandidateSource&) = default;
};

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s.front())) return false;
  for (char c : s)
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  return true;
}

inline void validate(const CandidateSource& src) {
  if (src.source_text.empty()) fail(errc::invalid_argument, "candidate source is empty");
  if (!is_identifier(src.entry_name))
    fail(errc::invalid_argument, "entry name '" + src.entry_name + "' is not an identifier");
}

/// Maps a language tag to a launcher command template. Tokens "{source}"
/// and "{entry}" are substituted per run.
class RunnerRegistry {
 public:
  void add(std::string language_tag, std::vector<std::string> command_template) {
    launchers_[std::move(language_tag)] = std::move(command_template);
  }

  bool contains(const std::string& tag) const { return launchers_.count(tag) != 0; }

  std::vector<std::string> command(const std::string& tag, const std::filesystem::path& source_file,
                                   const std::string& entry) const {
    auto it = launchers_.find(tag);
    if (it == launchers_.end()) fail(errc::runner_missing, "no runner registered for '" + tag + "'");
    std::vector<std::string> argv;
    for (auto tok : it->second) {
      replace_all(tok, "{source}", source_file.string());
      replace_all(tok, "{entry}", entry);
      argv.push_back(std::move(tok));
    }
    return argv;
  }

  /// {"python": ["python3", "shim.py", "{source}", "{entry}"], ...}
  static RunnerRegistry from_json(const nlohmann::json& j) {
    RunnerRegistry reg;
    for (const auto& [tag, cmd] : j.items()) reg.add(tag, cmd.get<std::vector<std::string>>());
    return reg;
  }

  nlohmann::json to_json() const { return launchers_; }

 private:
  static void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
      s.replace(pos, from.size(), to);
  }

  std::map<std::string, std::vector<std::string>> launchers_;
};

enum class FailureKind { crash, timeout, protocol_violation };

inline RunStatus to_status(FailureKind k) {
  switch (k) {
    case FailureKind::crash: return RunStatus::crashed;
    case FailureKind::timeout: return RunStatus::timeout;
    case FailureKind::protocol_violation: return RunStatus::protocol_violation;
  }
  return RunStatus::crashed;
}

struct RunFailure {
  FailureKind kind = FailureKind::crash;
  std::string detail;
  std::optional<RunTrace> partial_trace;  // absent when nothing was evaluated
};

struct RunOutcome {
  std::variant<RunTrace, RunFailure> value;
  double cpu_seconds = 0.0;

  bool ok() const noexcept { return std::holds_alternative<RunTrace>(value); }
  const RunTrace& trace() const { return std::get<RunTrace>(value); }
  const RunFailure& failure() const { return std::get<RunFailure>(value); }

  /// The trace to persist: the full trace, the partial one, or an empty
  /// trace carrying the failure status.
  RunTrace recorded_trace(const ProblemInstance& inst, std::int64_t budget, std::uint64_t seed) const {
    if (ok()) return trace();
    const auto& f = failure();
    RunTrace tr;
    if (f.partial_trace) {
      tr = *f.partial_trace;
    } else {
      tr.problem = inst.id();
      tr.run_seed = seed;
      tr.budget = budget;
      tr.orientation = inst.orientation();
    }
    tr.status = to_status(f.kind);
    return tr;
  }
};

struct RunOptions {
  double timeout_s = 600.0;
  /// How long a child may linger after "stop" before it is killed.
  double stop_grace_s = 1.0;
};

namespace detail {

inline nlohmann::json init_message(const ProblemInstance& inst, std::int64_t budget, std::uint64_t seed) {
  return {{"type", "init"},
          {"dim", inst.dim()},
          {"budget", budget},
          {"seed", seed},
          {"domain", inst.domain() == DomainKind::boolean ? "bool" : "real"},
          {"lb", kRealLower},
          {"ub", kRealUpper},
          {"y_opt", inst.y_opt()},
          {"orientation", to_string(inst.orientation())}};
}

inline std::optional<std::vector<double>> parse_ask(const std::string& line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto type = j.find("type");
  auto x = j.find("x");
  if (type == j.end() || *type != "ask" || x == j.end() || !x->is_array()) return std::nullopt;
  std::vector<double> out;
  out.reserve(x->size());
  for (const auto& v : *x) {
    if (!v.is_number()) return std::nullopt;
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::string seconds_str(double s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

}  // namespace detail

/// One run of a candidate on one instance. Candidate misbehavior is
/// reported as a RunFailure; only environment problems throw.
inline RunOutcome run_candidate(const CandidateSource& src, const std::filesystem::path& source_file,
                                const ProblemInstance& inst, std::int64_t budget, std::uint64_t seed,
                                const RunnerRegistry& runners, const RunOptions& opts = {}) {
  const auto argv = runners.command(src.language_tag, source_file, src.entry_name);
  MonitoredFunction func(inst, budget, seed);
  const auto start = Clock::now();
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(std::max(0.0, opts.timeout_s)));
  auto child = ChildProcess::spawn(argv);

  auto partial = [&]() -> std::optional<RunTrace> {
    if (func.evaluations() == 0) return std::nullopt;
    return func.finish();
  };
  auto failed = [&](FailureKind kind, std::string detail) {
    const auto info = child.terminate();
    RunOutcome out{RunFailure{kind, std::move(detail), partial()}, info.cpu_seconds};
    return out;
  };
  auto stop = [&](std::string_view reason) {
    child.write_line(nlohmann::json{{"type", "stop"}, {"reason", reason}}.dump());
    child.close_stdin();
    const auto grace = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                          std::chrono::duration<double>(opts.stop_grace_s));
    child.wait_until(std::min(grace, std::max(deadline, Clock::now())));
    const auto info = child.terminate();
    return RunOutcome{func.finish(), info.cpu_seconds};
  };

  if (!child.write_line(detail::init_message(inst, budget, seed).dump())) {
    // Child died before reading anything; classify by its exit.
    child.wait_until(Clock::now() + std::chrono::seconds(1));
    return failed(FailureKind::crash, "child closed its input before init: " + child.stderr_tail());
  }

  std::string line;
  for (;;) {
    switch (child.read_line(line, deadline)) {
      case ChildProcess::ReadResult::timeout:
        return failed(FailureKind::timeout, "no answer within " + detail::seconds_str(opts.timeout_s) + " s");
      case ChildProcess::ReadResult::eof: {
        child.close_stdin();
        auto info = child.wait_until(std::max(deadline, Clock::now() + std::chrono::seconds(1)));
        if (!info) return failed(FailureKind::timeout, "child closed stdout but did not exit");
        if (info->exited && info->code == 0) {
          const auto done = child.terminate();
          return RunOutcome{func.finish(), done.cpu_seconds};
        }
        const std::string how = info->exited ? "exit code " + std::to_string(info->code)
                                             : "signal " + std::to_string(info->code);
        return failed(FailureKind::crash, how + ": " + child.stderr_tail());
      }
      case ChildProcess::ReadResult::line:
        break;
    }
    if (line.empty()) continue;
    auto x = detail::parse_ask(line);
    if (!x) return failed(FailureKind::protocol_violation, "malformed message: " + line.substr(0, 200));
    std::optional<double> y;
    try {
      y = func(*x);
    } catch (const error& e) {
      return failed(FailureKind::protocol_violation, e.what());
    }
    if (!y) return stop("budget_exhausted");  // unreachable: stop is sent with the last tell
    const bool hit = func.target_hit();
    child.write_line(nlohmann::json{{"type", "tell"}, {"y", *y}, {"evals", func.evaluations()}, {"target_hit", hit}}
                         .dump());
    if (hit) return stop("target_hit");
    if (func.exhausted()) return stop("budget_exhausted");
  }
}

struct InstanceResult {
  ProblemId id;
  double auc = 0.0;
  RunStatus status = RunStatus::budget_exhausted;
  std::string detail;
  std::vector<RunTrace> traces;
};

struct FitnessReport {
  std::vector<InstanceResult> per_instance;
  double mean_auc = 0.0;

  bool all_failed() const {
    if (per_instance.empty()) return false;
    for (const auto& r : per_instance)
      if (!is_failure(r.status)) return false;
    return true;
  }
};

/// Assigns the arithmetic mean of per-instance AUCs.
inline void finalize_mean(FitnessReport& rep) {
  double s = 0.0;
  for (const auto& r : rep.per_instance) s += r.auc;
  rep.mean_auc = rep.per_instance.empty() ? 0.0 : s / static_cast<double>(rep.per_instance.size());
}

struct FitnessOptions {
  double timeout_s = 600.0;
  /// Total child CPU time allowed across all runs of one problem.
  double cpu_cap_s = 3000.0;
  int runs_per_instance = 1;
  int grid_points = kDefaultGridSize;
  int parallelism = 1;
  double stop_grace_s = 1.0;
};

inline std::uint64_t run_seed(int instance, int run) {
  return static_cast<std::uint64_t>(instance) + 1000ULL * static_cast<std::uint64_t>(run);
}

/// Writes the candidate source to `dir` and returns its path.
inline std::filesystem::path materialize(const CandidateSource& src, const std::filesystem::path& dir,
                                         const std::string& stem = "candidate") {
  std::filesystem::create_directories(dir);
  const auto ext = src.language_tag == "python" ? ".py" : "." + src.language_tag;
  auto path = dir / (stem + ext);
  std::ofstream os(path, std::ios::binary);
  os << src.source_text;
  if (!os) fail(errc::io_error, "cannot write " + path.string());
  return path;
}

/// Mean AUC over the listed instances of one problem. Any failed run zeroes
/// its instance's AUC.
inline FitnessReport fitness(const CandidateSource& src, const std::filesystem::path& source_file,
                             const ProblemId& base, const std::vector<int>& instances, std::int64_t budget,
                             const RunnerRegistry& runners, const FitnessOptions& opts = {}) {
  if (instances.empty()) fail(errc::invalid_argument, "no instances to evaluate");
  FitnessReport rep;
  rep.per_instance.resize(instances.size());

  std::atomic<std::size_t> next{0};
  std::mutex cpu_mu;
  double cpu_used = 0.0;
  std::exception_ptr env_error;
  std::mutex err_mu;

  auto work = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      try {
        ProblemId id = base;
        id.instance = instances[i];
        const auto inst = make_instance(id);
        InstanceResult res;
        res.id = id;
        bool any_failed = false;
        for (int h = 0; h < std::max(1, opts.runs_per_instance); ++h) {
          const auto seed = run_seed(id.instance, h);
          double remaining;
          {
            std::lock_guard lock(cpu_mu);
            remaining = opts.cpu_cap_s - cpu_used;
          }
          RunOutcome out;
          if (remaining <= 0) {
            out.value = RunFailure{FailureKind::timeout, "problem CPU cap exhausted", std::nullopt};
          } else {
            RunOptions ro{std::min(opts.timeout_s, remaining), opts.stop_grace_s};
            out = run_candidate(src, source_file, inst, budget, seed, runners, ro);
            std::lock_guard lock(cpu_mu);
            cpu_used += out.cpu_seconds;
            if (cpu_used > opts.cpu_cap_s && out.ok())
              out.value = RunFailure{FailureKind::timeout, "problem CPU cap exceeded", out.trace()};
          }
          auto tr = out.recorded_trace(inst, budget, seed);
          if (!out.ok()) {
            any_failed = true;
            if (res.detail.empty()) res.detail = out.failure().detail;
          }
          res.traces.push_back(std::move(tr));
        }
        if (any_failed) {
          res.auc = 0.0;
          for (const auto& tr : res.traces)
            if (is_failure(tr.status)) {
              res.status = tr.status;
              break;
            }
        } else {
          res.auc = auc(res.traces, target_set(inst), log_time_grid(budget, opts.grid_points)).auc;
          res.status = res.traces.front().status;
        }
        rep.per_instance[i] = std::move(res);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!env_error) env_error = std::current_exception();
        next = instances.size();
      }
    }
  };

  const int workers = std::clamp(opts.parallelism, 1, static_cast<int>(instances.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (env_error) std::rethrow_exception(env_error);
  finalize_mean(rep);
  return rep;
}

inline nlohmann::json to_json(const FitnessReport& rep) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : rep.per_instance)
    per.push_back({{"problem", r.id}, {"auc", r.auc}, {"status", to_string(r.status)}, {"detail", r.detail}});
  return {{"mean_auc", rep.mean_auc}, {"per_instance", per}};
}

inline FitnessReport fitness_from_json(const nlohmann::json& j) {
  FitnessReport rep;
  rep.mean_auc = j.at("mean_auc").get<double>();
  for (const auto& r : j.at("per_instance")) {
    InstanceResult ir;
    ir.id = r.at("problem").get<ProblemId>();
    ir.auc = r.at("auc").get<double>();
    ir.status = parse_run_status(r.at("status").get<std::string>());
    ir.detail = r.value("detail", "");
    rep.per_instance.push_back(std::move(ir));
  }
  return rep;
}

}  // namespace bag
