#pragma once

// Budgeted evaluation with best-so-far recording, and the anytime
// performance measure (area under the ECDF curve over a time grid).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bag/error.hpp"
#include "bag/problems.hpp"

namespace bag {

enum class RunStatus { budget_exhausted, target_hit, crashed, timeout, protocol_violation };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::target_hit: return "target_hit";
    case RunStatus::crashed: return "crashed";
    case RunStatus::timeout: return "timeout";
    case RunStatus::protocol_violation: return "protocol_violation";
  }
  return "unknown";
}

inline RunStatus parse_run_status(std::string_view s) {
  for (auto v : {RunStatus::budget_exhausted, RunStatus::target_hit, RunStatus::crashed,
                 RunStatus::timeout, RunStatus::protocol_violation})
    if (to_string(v) == s) return v;
  fail(errc::invalid_argument, "unknown run status '" + std::string(s) + "'");
}

inline bool is_failure(RunStatus s) noexcept {
  return s == RunStatus::crashed || s == RunStatus::timeout || s == RunStatus::protocol_violation;
}

struct TracePoint {
  std::int64_t evals = 0;
  double best_y = 0.0;
  friend bool operator==(const TracePoint&, const TracePoint&) = default;
  friend std::ostream& operator<<(std::ostream& os, const TracePoint& p) {
    return os << '(' << p.evals << ", " << p.best_y << ')';
  }
};

/// Best-so-far trajectory of one run. Only improvement breakpoints are
/// stored; the value at time t is the last breakpoint with evals <= t.
struct RunTrace {
  ProblemId problem;
  std::uint64_t run_seed = 0;
  std::int64_t budget = 0;
  Orientation orientation = Orientation::maximize;
  std::vector<TracePoint> points;
  std::int64_t total_evals = 0;
  RunStatus status = RunStatus::budget_exhausted;

  friend bool operator==(const RunTrace&, const RunTrace&) = default;

  std::optional<double> best_at(std::int64_t t) const {
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](std::int64_t v, const TracePoint& p) { return v < p.evals; });
    if (it == points.begin()) return std::nullopt;
    return std::prev(it)->best_y;
  }
};

/// Single-owner monitored objective. Every accepted call is one evaluation;
/// calls past the budget are refused without touching the trace.
class MonitoredFunction {
 public:
  MonitoredFunction(const ProblemInstance& instance, std::int64_t budget, std::uint64_t run_seed = 0)
      : instance_(&instance) {
    if (budget < 1) fail(errc::invalid_argument, "budget must be >= 1");
    trace_.problem = instance.id();
    trace_.run_seed = run_seed;
    trace_.budget = budget;
    trace_.orientation = instance.orientation();
  }

  /// Returns nullopt once the budget is spent. Domain violations propagate
  /// and do not consume budget.
  std::optional<double> operator()(std::span<const double> x) {
    if (exhausted()) return std::nullopt;
    const double y = instance_->evaluate(x);
    ++trace_.total_evals;
    if (trace_.points.empty() || strictly_better(y, trace_.points.back().best_y, trace_.orientation))
      trace_.points.push_back({trace_.total_evals, y});
    return y;
  }

  bool exhausted() const noexcept { return trace_.total_evals >= trace_.budget; }
  std::int64_t evaluations() const noexcept { return trace_.total_evals; }
  std::int64_t budget() const noexcept { return trace_.budget; }
  const ProblemInstance& instance() const noexcept { return *instance_; }

  bool target_hit() const noexcept {
    return !trace_.points.empty() &&
           at_least_as_good(trace_.points.back().best_y, instance_->y_opt(), trace_.orientation);
  }

  const RunTrace& trace() const noexcept { return trace_; }

  /// Finalizes the trace. Without an explicit failure status the run is
  /// classified as target_hit or budget_exhausted.
  RunTrace finish(std::optional<RunStatus> failure = std::nullopt) const {
    RunTrace out = trace_;
    if (failure)
      out.status = *failure;
    else
      out.status = target_hit() ? RunStatus::target_hit : RunStatus::budget_exhausted;
    return out;
  }

 private:
  const ProblemInstance* instance_;
  RunTrace trace_;
};

struct TimeGrid {
  std::vector<std::int64_t> points;
};

inline constexpr int kDefaultGridSize = 100;

/// Geometric grid from 1 to budget rounded to integers and deduplicated.
inline TimeGrid log_time_grid(std::int64_t budget, int count = kDefaultGridSize) {
  if (count < 2) fail(errc::invalid_argument, "grid count must be >= 2");
  if (budget < 1) fail(errc::invalid_argument, "budget must be >= 1");
  TimeGrid grid;
  const double log_b = std::log(static_cast<double>(budget));
  for (int k = 0; k < count; ++k) {
    std::int64_t t = k == count - 1
                         ? budget
                         : std::llround(std::exp(log_b * k / static_cast<double>(count - 1)));
    t = std::clamp<std::int64_t>(t, 1, budget);
    if (grid.points.empty() || t > grid.points.back()) grid.points.push_back(t);
  }
  return grid;
}

namespace detail {

inline std::size_t targets_reached(std::optional<double> best, const TargetSet& targets) {
  if (!best) return 0;
  std::size_t n = 0;
  for (double phi : targets.values)
    if (at_least_as_good(*best, phi, targets.orientation)) ++n;
  return n;
}

}  // namespace detail

/// Fraction of (run, target) pairs attained by the best-so-far at time t.
inline double ecdf_value(std::span<const RunTrace> traces, const TargetSet& targets, std::int64_t t) {
  if (targets.empty()) fail(errc::empty_targets, "ecdf_value");
  if (traces.empty()) fail(errc::empty_traces, "ecdf_value");
  double sum = 0.0;
  for (const auto& tr : traces)
    sum += static_cast<double>(detail::targets_reached(tr.best_at(t), targets)) /
           static_cast<double>(targets.size());
  return sum / static_cast<double>(traces.size());
}

struct AucReport {
  double auc = 0.0;
  std::vector<double> per_time_ecdf;
  std::size_t runs = 0;
};

/// Normalized area under the ECDF curve, i.e. the mean ECDF over the grid.
inline AucReport auc(std::span<const RunTrace> traces, const TargetSet& targets, const TimeGrid& grid) {
  if (traces.empty()) fail(errc::empty_traces, "auc");
  if (targets.empty()) fail(errc::empty_targets, "auc");
  if (grid.points.empty()) fail(errc::invalid_argument, "empty time grid");
  AucReport rep;
  rep.runs = traces.size();
  rep.per_time_ecdf.reserve(grid.points.size());
  double total = 0.0;
  for (auto t : grid.points) {
    const double e = ecdf_value(traces, targets, t);
    rep.per_time_ecdf.push_back(e);
    total += e;
  }
  rep.auc = total / static_cast<double>(grid.points.size());
  return rep;
}

// Trace files: JSON Lines with a header, one line per improvement, and a
// footer carrying the final status.

inline void write_trace(std::ostream& os, const RunTrace& tr) {
  nlohmann::json header = {{"problem", tr.problem}, {"seed", tr.run_seed}, {"budget", tr.budget}};
  os << header.dump() << '\n';
  for (const auto& p : tr.points) os << nlohmann::json{{"evals", p.evals}, {"best_y", p.best_y}}.dump() << '\n';
  os << nlohmann::json{{"status", to_string(tr.status)}, {"total_evals", tr.total_evals}}.dump() << '\n';
}

inline RunTrace read_trace(std::istream& is) {
  RunTrace tr;
  std::string line;
  bool have_header = false, have_footer = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(errc::io_error, "malformed trace line: " + line);
    if (!have_header) {
      tr.problem = j.at("problem").get<ProblemId>();
      tr.run_seed = j.at("seed").get<std::uint64_t>();
      tr.budget = j.at("budget").get<std::int64_t>();
      tr.orientation = tr.problem.suite == Suite::pbo ? Orientation::maximize : Orientation::minimize;
      have_header = true;
    } else if (j.contains("status")) {
      tr.status = parse_run_status(j.at("status").get<std::string>());
      tr.total_evals = j.at("total_evals").get<std::int64_t>();
      have_footer = true;
      break;
    } else {
      tr.points.push_back({j.at("evals").get<std::int64_t>(), j.at("best_y").get<double>()});
    }
  }
  if (!have_header || !have_footer) fail(errc::io_error, "trace is missing its header or footer");
  return tr;
}

/// Reads consecutive traces until end of stream.
inline std::vector<RunTrace> read_traces(std::istream& is) {
  std::vector<RunTrace> out;
  for (;;) {
    while (is && std::isspace(is.peek())) is.get();
    if (!is || is.peek() == std::char_traits<char>::eof()) break;
    out.push_back(read_trace(is));
  }
  return out;
}

}  // namespace bag
