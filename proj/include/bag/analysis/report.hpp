#pragma once

// Comparison tables over approaches: per-problem AUC normalized by the best
// approach, competition ranks, and summary rows. Also failure rates and
// convergence series for search results.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "bag/analysis/csv.hpp"
#include "bag/error.hpp"
#include "bag/search.hpp"

namespace bag::analysis {

/// Competition ranks (1 = largest); ties share the smallest rank and the
/// following ranks skip.
inline std::vector<int> competition_ranks(const std::vector<double>& values) {
  std::vector<int> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int better = 0;
    for (double v : values) better += v > values[i];
    ranks[i] = better + 1;
  }
  return ranks;
}

struct ReportTable {
  std::vector<std::string> approaches;
  std::vector<std::string> problems;
  std::vector<std::vector<double>> normalized;  // [problem][approach]
  std::vector<std::vector<int>> ranks;          // [problem][approach]
  std::vector<double> mean;                     // per approach
  std::vector<double> stddev;                   // population std per approach
  std::vector<double> average_rank;

  /// One row per problem with "value (rank)" cells, then Mean, Std and
  /// Average Rank rows.
  std::string to_csv() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", v);
      return std::string(buf);
    };
    std::string out;
    std::vector<std::string> head{"problem"};
    head.insert(head.end(), approaches.begin(), approaches.end());
    out += csv_row(head);
    for (std::size_t p = 0; p < problems.size(); ++p) {
      std::vector<std::string> row{problems[p]};
      for (std::size_t a = 0; a < approaches.size(); ++a)
        row.push_back(num(normalized[p][a]) + " (" + std::to_string(ranks[p][a]) + ")");
      out += csv_row(row);
    }
    auto summary = [&](const std::string& label, const std::vector<double>& v, bool two) {
      std::vector<std::string> row{label};
      for (double x : v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, two ? "%.2f" : "%.3f", x);
        row.push_back(buf);
      }
      out += csv_row(row);
    };
    summary("Mean", mean, false);
    summary("Std", stddev, false);
    summary("Average Rank", average_rank, true);
    return out;
  }
};

/// `results[approach][problem]` holds mean AUCs. Every approach must cover
/// the same problems. A problem where every approach scored 0 normalizes to
/// all zeros.
inline ReportTable report_table(const std::map<std::string, std::map<std::string, double>>& results,
                                std::vector<std::string> approach_order = {}) {
  if (results.empty()) fail(errc::empty_results, "no approaches given");
  if (approach_order.empty())
    for (const auto& [name, _] : results) approach_order.push_back(name);
  if (approach_order.size() != results.size())
    fail(errc::invalid_argument, "approach order must list every approach once");
  for (const auto& a : approach_order)
    if (!results.contains(a)) fail(errc::invalid_argument, "unknown approach " + a);

  ReportTable t;
  t.approaches = approach_order;
  const auto& first = results.at(approach_order.front());
  if (first.empty()) fail(errc::empty_results, "no problems given");
  for (const auto& [p, _] : first) t.problems.push_back(p);
  for (const auto& a : approach_order) {
    const auto& row = results.at(a);
    if (row.size() != first.size()) fail(errc::invalid_argument, a + " does not cover the same problems");
    for (const auto& p : t.problems)
      if (!row.contains(p)) fail(errc::invalid_argument, a + " is missing problem " + p);
  }

  const std::size_t k = approach_order.size();
  t.mean.assign(k, 0.0);
  t.stddev.assign(k, 0.0);
  t.average_rank.assign(k, 0.0);
  for (const auto& p : t.problems) {
    std::vector<double> raw;
    for (const auto& a : approach_order) {
      const double v = results.at(a).at(p);
      if (!std::isfinite(v) || v < 0) fail(errc::invalid_argument, "AUC values must be finite and >= 0");
      raw.push_back(v);
    }
    const double best = *std::max_element(raw.begin(), raw.end());
    std::vector<double> norm(k, 0.0);
    if (best > 0)
      for (std::size_t a = 0; a < k; ++a) norm[a] = raw[a] / best;
    t.ranks.push_back(competition_ranks(raw));
    t.normalized.push_back(std::move(norm));
  }
  const double np = static_cast<double>(t.problems.size());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t p = 0; p < t.problems.size(); ++p) {
      t.mean[a] += t.normalized[p][a] / np;
      t.average_rank[a] += t.ranks[p][a] / np;
    }
    for (std::size_t p = 0; p < t.problems.size(); ++p)
      t.stddev[a] += (t.normalized[p][a] - t.mean[a]) * (t.normalized[p][a] - t.mean[a]) / np;
    t.stddev[a] = std::sqrt(t.stddev[a]);
  }
  return t;
}

/// Fraction of queries whose response did not parse or whose candidate
/// failed on every instance.
inline double failure_rate(const search::SearchResult& r) {
  if (r.records.empty()) return 0.0;
  std::size_t failed = 0;
  for (const auto& rec : r.records) failed += rec.failure.has_value();
  return static_cast<double>(failed) / static_cast<double>(r.records.size());
}

/// `t,candidate_auc,best_so_far` with the evaluated seed as t = 0.
inline std::string convergence_csv(const search::SearchResult& r) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = "t,candidate_auc,best_so_far\n";
  out += "0," + num(r.seed.fitness.mean_auc) + "," + num(r.seed.fitness.mean_auc) + "\n";
  for (std::size_t i = 0; i < r.records.size(); ++i)
    out += std::to_string(r.records[i].t) + "," + num(r.records[i].fitness.mean_auc) + "," +
           num(r.best_so_far_series[i]) + "\n";
  return out;
}

}  // namespace bag::analysis
