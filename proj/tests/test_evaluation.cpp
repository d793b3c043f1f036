#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "bag/evaluation.hpp"

using namespace bag;

namespace {

std::vector<double> bits(std::string_view s) {
  std::vector<double> x;
  for (char c : s) x.push_back(c == '1' ? 1.0 : 0.0);
  return x;
}

RunTrace make_trace(std::vector<TracePoint> pts, Orientation o = Orientation::maximize) {
  RunTrace tr;
  tr.orientation = o;
  tr.points = std::move(pts);
  tr.total_evals = tr.points.empty() ? 0 : tr.points.back().evals;
  tr.budget = tr.total_evals;
  return tr;
}

// Literal transcription of the definition: a triple sum of indicators over
// runs, targets and grid points, with the best-so-far found by scanning.
double auc_oracle(const std::vector<RunTrace>& runs, const TargetSet& targets, const std::vector<std::int64_t>& grid) {
  double hits = 0;
  for (const auto& run : runs)
    for (double phi : targets.values)
      for (auto t : grid) {
        bool have = false;
        double best = 0;
        for (const auto& p : run.points)
          if (p.evals <= t) {
            best = p.best_y;
            have = true;
          }
        if (have && (targets.orientation == Orientation::maximize ? best >= phi : best <= phi)) hits += 1;
      }
  return hits / (static_cast<double>(runs.size()) * targets.size() * grid.size());
}

}  // namespace

TEST(Monitor, RecordsOnlyStrictImprovements) {
  auto inst = make_instance({Suite::pbo, 1, 1, 4});
  MonitoredFunction f(inst, 3);
  EXPECT_EQ(f(bits("0000")), 0.0);
  EXPECT_EQ(f(bits("1010")), 2.0);
  EXPECT_EQ(f(bits("1000")), 1.0);
  auto tr = f.finish();
  EXPECT_EQ(tr.points, (std::vector<TracePoint>{{1, 0.0}, {2, 2.0}}));
  EXPECT_EQ(tr.total_evals, 3);
  EXPECT_EQ(tr.status, RunStatus::budget_exhausted);
}

TEST(Monitor, OptimumOnFirstQueryIsATargetHit) {
  auto inst = make_instance({Suite::bbob, 1, 3, 5});
  MonitoredFunction f(inst, 100);
  f(inst.optimum());
  EXPECT_TRUE(f.target_hit());
  auto tr = f.finish();
  EXPECT_EQ(tr.status, RunStatus::target_hit);
  EXPECT_EQ(tr.total_evals, 1);
}

TEST(Monitor, RefusesCallsBeyondBudget) {
  auto inst = make_instance({Suite::pbo, 1, 1, 4});
  MonitoredFunction f(inst, 2);
  EXPECT_TRUE(f(bits("0001")));
  EXPECT_TRUE(f(bits("0011")));
  const auto before = f.trace();
  EXPECT_FALSE(f(bits("1111")).has_value());
  EXPECT_EQ(f.trace(), before);
  EXPECT_EQ(f.evaluations(), 2);
}

TEST(Monitor, DomainViolationsPropagateWithoutConsumingBudget) {
  auto inst = make_instance({Suite::pbo, 1, 1, 4});
  MonitoredFunction f(inst, 2);
  EXPECT_THROW(f(bits("10")), error);
  EXPECT_EQ(f.evaluations(), 0);
  EXPECT_THROW(MonitoredFunction(inst, 0), error);
}

TEST(TimeGrid, SmallCases) {
  // round(10^(k/2)) for k = 0, 1, 2
  EXPECT_EQ(log_time_grid(10, 3).points, (std::vector<std::int64_t>{1, 3, 10}));
  EXPECT_EQ(log_time_grid(1, 2).points, (std::vector<std::int64_t>{1}));
  auto g = log_time_grid(10000, 100);
  EXPECT_EQ(g.points.front(), 1);
  EXPECT_EQ(g.points.back(), 10000);
  EXPECT_LE(g.points.size(), 100u);
  for (std::size_t i = 1; i < g.points.size(); ++i) EXPECT_LT(g.points[i - 1], g.points[i]);
  EXPECT_THROW(log_time_grid(10, 1), error);
}

TEST(Ecdf, HandCounts) {
  TargetSet ts{{2, 4, 6, 8}, Orientation::maximize};
  std::vector<RunTrace> runs{make_trace({{1, 5}})};
  EXPECT_DOUBLE_EQ(ecdf_value(runs, ts, 3), 0.5);
  std::vector<RunTrace> low{make_trace({{1, 1}})};
  EXPECT_EQ(ecdf_value(low, ts, 3), 0.0);
  std::vector<RunTrace> top{make_trace({{1, 8}})};
  EXPECT_EQ(ecdf_value(top, ts, 1), 1.0);
  // Before the first evaluation nothing is reached.
  std::vector<RunTrace> late{make_trace({{5, 8}})};
  EXPECT_EQ(ecdf_value(late, ts, 4), 0.0);
  EXPECT_THROW(ecdf_value(runs, TargetSet{}, 1), error);
}

TEST(Ecdf, MinimizationUsesLessOrEqual) {
  TargetSet ts{{100, 10, 1}, Orientation::minimize};
  std::vector<RunTrace> runs{make_trace({{1, 50}, {3, 10}}, Orientation::minimize)};
  EXPECT_DOUBLE_EQ(ecdf_value(runs, ts, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(ecdf_value(runs, ts, 3), 2.0 / 3.0);
}

TEST(Auc, HandFixture) {
  TargetSet ts{{1, 2, 3}, Orientation::maximize};
  TimeGrid grid{{1, 2}};
  std::vector<RunTrace> runs{make_trace({{1, 1}, {2, 3}})};
  const auto rep = auc(runs, ts, grid);
  EXPECT_EQ(rep.auc, 2.0 / 3.0);
  EXPECT_EQ(rep.per_time_ecdf.size(), 2u);
  EXPECT_EQ(rep.runs, 1u);
}

TEST(Auc, Extremes) {
  TargetSet ts{{1, 2, 3}, Orientation::maximize};
  auto grid = log_time_grid(100, 20);
  std::vector<RunTrace> best{make_trace({{1, 3}})};
  EXPECT_EQ(auc(best, ts, grid).auc, 1.0);
  std::vector<RunTrace> none{make_trace({{1, 0}, {50, 0.5}})};
  EXPECT_EQ(auc(none, ts, grid).auc, 0.0);
  EXPECT_THROW(auc(std::vector<RunTrace>{}, ts, grid), error);
}

TEST(Auc, MatchesTripleLoopOracleOnRandomCases) {
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 1000; ++c) {
    const auto orient = (rng() & 1) ? Orientation::maximize : Orientation::minimize;
    const int r = 1 + static_cast<int>(uniform_index(rng, 3));
    const int m = 1 + static_cast<int>(uniform_index(rng, 10));
    const int z = 1 + static_cast<int>(uniform_index(rng, 10));
    const std::int64_t budget = 1 + static_cast<std::int64_t>(uniform_index(rng, 60));

    TargetSet ts{{}, orient};
    std::vector<double> raw;
    while (raw.size() < static_cast<std::size_t>(m)) {
      const double v = static_cast<double>(uniform_index(rng, 40));
      if (std::find(raw.begin(), raw.end(), v) == raw.end()) raw.push_back(v);
    }
    std::sort(raw.begin(), raw.end());
    if (orient == Orientation::minimize) std::reverse(raw.begin(), raw.end());
    ts.values = raw;

    std::vector<std::int64_t> grid;
    while (grid.size() < static_cast<std::size_t>(std::min<std::int64_t>(z, budget))) {
      const auto t = 1 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(budget)));
      if (std::find(grid.begin(), grid.end(), t) == grid.end()) grid.push_back(t);
    }
    std::sort(grid.begin(), grid.end());

    std::vector<RunTrace> runs;
    for (int h = 0; h < r; ++h) {
      std::vector<TracePoint> pts;
      double best = orient == Orientation::maximize ? -1.0 : 41.0;
      for (std::int64_t e = 1; e <= budget; ++e) {
        if (uniform01(rng) < 0.3) {
          const double y = static_cast<double>(uniform_index(rng, 42)) - 1.0;
          if (strictly_better(y, best, orient)) {
            best = y;
            pts.push_back({e, y});
          }
        }
      }
      runs.push_back(make_trace(pts, orient));
    }
    const double got = auc(runs, ts, TimeGrid{grid}).auc;
    ASSERT_NEAR(got, auc_oracle(runs, ts, grid), 1e-12) << "case " << c;
  }
}

TEST(Auc, Properties) {
  std::mt19937_64 rng(99);
  TargetSet ts{{1, 3, 5, 7, 9}, Orientation::maximize};
  auto grid = log_time_grid(200, 30);
  for (int c = 0; c < 200; ++c) {
    std::vector<TracePoint> pts;
    double best = -1;
    for (std::int64_t e = 1; e <= 150; ++e)
      if (uniform01(rng) < 0.05) {
        best += 1 + static_cast<double>(uniform_index(rng, 3));
        pts.push_back({e, best});
      }
    std::vector<RunTrace> runs{make_trace(pts)};
    const double a = auc(runs, ts, grid).auc;
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);

    // Duplicating a run leaves the mean unchanged.
    std::vector<RunTrace> doubled{runs[0], runs[0]};
    EXPECT_DOUBLE_EQ(auc(doubled, ts, grid).auc, a);

    // Appending an improving breakpoint never lowers the AUC.
    auto better = runs;
    better[0].points.push_back({160, best + 1});
    EXPECT_GE(auc(better, ts, grid).auc, a);

    // Truncating the budget (the grid and the run) never raises it.
    auto short_grid = log_time_grid(50, 30);
    std::vector<RunTrace> cut{runs[0]};
    std::erase_if(cut[0].points, [](const TracePoint& p) { return p.evals > 50; });
    EXPECT_LE(auc(cut, ts, short_grid).auc, a + 1e-12);

    // ECDF is non-decreasing in t.
    double prev = 0;
    for (std::int64_t t = 1; t <= 200; t += 7) {
      const double e = ecdf_value(runs, ts, t);
      EXPECT_GE(e, prev);
      prev = e;
    }
  }
}

TEST(TraceIo, RoundTripsThroughJsonLines) {
  RunTrace tr = make_trace({{1, 0.5}, {4, 2.25}, {9, 3.125}}, Orientation::minimize);
  tr.problem = {Suite::bbob, 8, 3, 5};
  tr.run_seed = 3;
  tr.budget = 100;
  tr.total_evals = 40;
  tr.status = RunStatus::timeout;
  std::stringstream ss;
  write_trace(ss, tr);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            R"({"budget":100,"problem":{"dim":5,"function":8,"instance":3,"suite":"bbob"},"seed":3})");
  EXPECT_NE(text.find(R"({"best_y":2.25,"evals":4})"), std::string::npos);
  EXPECT_NE(text.find(R"({"status":"timeout","total_evals":40})"), std::string::npos);
  EXPECT_EQ(read_trace(ss), tr);

  std::stringstream bad("{\"evals\":1}\n");
  EXPECT_THROW(read_trace(bad), std::exception);
}
