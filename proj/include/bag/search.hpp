#pragma once

// Elitist (1+1) generation loop with periodic benchmark injection.
//
// Iteration t = 1 is the initial generation: the first benchmark entry is
// shown as reference code. For t >= 2 the action is chosen by next_action.
// The selected seed is evaluated once before the loop (generation 000) so
// the first comparison is defined; it does not count against the query
// budget.
//
// Run directory:
//   config.json               deterministic config snapshot
//   generations/NNN.json      record without the source text
//   generations/NNN.src       source text
//   traces/NNN_instK.jsonl    one trace per run on instance K
//   session.jsonl             every LLM exchange
//   result.json               summary, no timestamps

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bag/llm.hpp"
#include "bag/promptkit.hpp"
#include "bag/rng.hpp"
#include "bag/sandbox.hpp"

namespace bag::search {

enum class Strategy { bag, refine_only, create_only };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::bag: return "bag";
    case Strategy::refine_only: return "refine-only";
    case Strategy::create_only: return "create-only";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "bag") return Strategy::bag;
  if (s == "refine-only" || s == "refine_only") return Strategy::refine_only;
  if (s == "create-only" || s == "create_only") return Strategy::create_only;
  fail(errc::invalid_argument, "unknown strategy '" + std::string(s) + "'");
}

struct BenchEntry {
  std::string name;
  std::string description;
  CandidateSource source;
};

struct SearchConfig {
  ProblemId problem;  // instance field unused
  std::vector<int> instances{1, 2, 3, 4, 5};
  std::int64_t eval_budget = 1000;
  std::vector<BenchEntry> bench_set;
  int query_budget = 100;
  int q = 10;
  std::uint64_t rng_seed = 0;
  Strategy strategy = Strategy::bag;
  std::string model;
  FitnessOptions sandbox;

  void validate() const {
    if (query_budget < 1) fail(errc::invalid_argument, "query_budget must be >= 1");
    if (q < 1) fail(errc::invalid_argument, "q must be >= 1");
    if (eval_budget < 1) fail(errc::invalid_argument, "eval_budget must be >= 1");
    if (instances.empty()) fail(errc::invalid_argument, "no instances");
    if (bench_set.empty() && strategy != Strategy::refine_only)
      fail(errc::invalid_argument, "bench_set is empty");
    for (const auto& b : bench_set) bag::validate(b.source);
  }
};

inline nlohmann::json to_json(const SearchConfig& c) {
  nlohmann::json bench = nlohmann::json::array();
  for (const auto& b : c.bench_set)
    bench.push_back({{"name", b.name}, {"description", b.description}, {"entry", b.source.entry_name},
                     {"language", b.source.language_tag}});
  return {{"problem", c.problem},
          {"instances", c.instances},
          {"eval_budget", c.eval_budget},
          {"bench_set", bench},
          {"query_budget", c.query_budget},
          {"q", c.q},
          {"rng_seed", c.rng_seed},
          {"strategy", to_string(c.strategy)},
          {"model", c.model},
          {"sandbox",
           {{"timeout_s", c.sandbox.timeout_s},
            {"cpu_cap_s", c.sandbox.cpu_cap_s},
            {"runs_per_instance", c.sandbox.runs_per_instance},
            {"grid_points", c.sandbox.grid_points},
            {"parallelism", c.sandbox.parallelism}}}};
}

/// Sampling without replacement over bench indices; refills after a full
/// pass.
class BenchCycle {
 public:
  explicit BenchCycle(std::uint64_t seed = 0) : rng_(seed) {}

  std::size_t next(std::size_t bench_size) {
    if (bench_size == 0) fail(errc::invalid_argument, "bench_size must be >= 1");
    if (size_ != bench_size) {
      size_ = bench_size;
      remaining_.clear();
    }
    if (remaining_.empty())
      for (std::size_t i = 0; i < bench_size; ++i) remaining_.push_back(i);
    const auto k = static_cast<std::size_t>(uniform_index(rng_, remaining_.size()));
    const auto idx = remaining_[k];
    remaining_.erase(remaining_.begin() + static_cast<std::ptrdiff_t>(k));
    return idx;
  }

  const std::vector<std::size_t>& remaining() const { return remaining_; }

 private:
  std::mt19937_64 rng_;
  std::vector<std::size_t> remaining_;
  std::size_t size_ = 0;
};

inline std::size_t next_bench(BenchCycle& cycle, std::size_t bench_size) { return cycle.next(bench_size); }

/// Schedule rule with the random draw supplied by the caller.
inline Action decide_action(int t, int q, double draw, BenchCycle& cycle, std::size_t bench_size) {
  if (t < 1 || q < 1) fail(errc::invalid_argument, "t and q must be >= 1");
  if (t % q == 0) return {ActionKind::refine_bench, next_bench(cycle, bench_size)};
  return {draw < 0.5 ? ActionKind::refine_best : ActionKind::create, 0};
}

/// Draws from `rng` only on non-injection iterations.
inline Action next_action(int t, int q, std::mt19937_64& rng, BenchCycle& cycle, std::size_t bench_size) {
  if (t >= 1 && q >= 1 && t % q == 0) return decide_action(t, q, 0.0, cycle, bench_size);
  return decide_action(t, q, uniform01(rng), cycle, bench_size);
}

inline bool accept(const FitnessReport& challenger, const FitnessReport& incumbent) {
  return challenger.mean_auc > incumbent.mean_auc;
}

struct CandidateRecord {
  int t = 0;
  Action action;
  bool initial = false;
  std::string description;
  CandidateSource source;
  FitnessReport fitness;
  bool accepted = false;
  std::optional<std::string> failure;
  std::string prompt_digest;
};

inline nlohmann::json record_json(const CandidateRecord& r) {
  nlohmann::json j = {{"t", r.t},
                      {"action", r.action},
                      {"initial", r.initial},
                      {"description", r.description},
                      {"entry", r.source.entry_name},
                      {"language", r.source.language_tag},
                      {"fitness", bag::to_json(r.fitness)},
                      {"accepted", r.accepted},
                      {"prompt_digest", r.prompt_digest}};
  j["failure"] = r.failure ? nlohmann::json(*r.failure) : nlohmann::json(nullptr);
  return j;
}

inline CandidateRecord record_from_json(const nlohmann::json& j, std::string source_text = {}) {
  CandidateRecord r;
  r.t = j.at("t").get<int>();
  r.action = j.at("action").get<Action>();
  r.initial = j.value("initial", false);
  r.description = j.at("description").get<std::string>();
  r.source = {j.value("language", std::string("python")), std::move(source_text), j.value("entry", std::string{})};
  r.fitness = fitness_from_json(j.at("fitness"));
  r.accepted = j.at("accepted").get<bool>();
  if (j.contains("failure") && !j["failure"].is_null()) r.failure = j["failure"].get<std::string>();
  r.prompt_digest = j.value("prompt_digest", std::string{});
  return r;
}

struct Incumbent {
  int t = 0;  // 0: the evaluated seed
  std::string name;
  std::string description;
  CandidateSource source;
  FitnessReport fitness;
};

struct SearchResult {
  Strategy strategy = Strategy::bag;
  Incumbent seed;
  std::vector<CandidateRecord> records;
  Incumbent incumbent;
  std::vector<double> best_so_far_series;  // indexed by t - 1
};

inline bool is_failed(const CandidateRecord& r) { return r.failure.has_value(); }

inline nlohmann::json result_json(const SearchResult& res) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : res.records)
    recs.push_back({{"t", r.t},
                    {"action", r.action},
                    {"mean_auc", r.fitness.mean_auc},
                    {"accepted", r.accepted},
                    {"failed", is_failed(r)}});
  auto inc = [](const Incumbent& i) {
    return nlohmann::json{{"t", i.t},
                          {"name", i.name},
                          {"description", i.description},
                          {"entry", i.source.entry_name},
                          {"mean_auc", i.fitness.mean_auc}};
  };
  return {{"strategy", to_string(res.strategy)},
          {"seed", inc(res.seed)},
          {"incumbent", inc(res.incumbent)},
          {"records", recs},
          {"best_so_far_series", res.best_so_far_series}};
}

struct SearchHooks {
  std::function<void(const CandidateRecord&, const Incumbent&)> on_record;
  /// Overrides prompt templates.
  prompt::Templates templates;
};

namespace detail {

inline std::string gen_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", t);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) fail(errc::io_error, "cannot write " + p.string());
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

class RunDir {
 public:
  explicit RunDir(std::optional<std::filesystem::path> root) : root_(std::move(root)) {
    if (!root_) {
      scratch_ = std::filesystem::temp_directory_path() /
                 ("bag_run_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
      std::filesystem::remove_all(scratch_);
    }
    for (const char* sub : {"generations", "traces", "work"}) std::filesystem::create_directories(base() / sub);
  }
  ~RunDir() {
    std::error_code ec;
    std::filesystem::remove_all(base() / "work", ec);
    if (!root_) std::filesystem::remove_all(scratch_, ec);
  }
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::filesystem::path& base() const { return root_ ? *root_ : scratch_; }

 private:
  static std::atomic<int>& counter() {
    static std::atomic<int> c{0};
    return c;
  }
  std::optional<std::filesystem::path> root_;
  std::filesystem::path scratch_;
};

inline void write_traces(const std::filesystem::path& dir, int t, const FitnessReport& rep) {
  for (const auto& inst : rep.per_instance) {
    std::ofstream os(dir / (gen_name(t) + "_inst" + std::to_string(inst.id.instance) + ".jsonl"), std::ios::binary);
    for (const auto& tr : inst.traces) write_trace(os, tr);
  }
}

inline FitnessReport zero_report(const SearchConfig& cfg, const std::string& why) {
  FitnessReport rep;
  for (int k : cfg.instances) {
    ProblemId id = cfg.problem;
    id.instance = k;
    rep.per_instance.push_back({id, 0.0, RunStatus::crashed, why, {}});
  }
  finalize_mean(rep);
  return rep;
}

}  // namespace detail

/// Runs the loop. `seed_override` replaces the first bench entry as the
/// starting point (refine-only with a given seed). `out_dir` empty: a
/// scratch directory is used and removed afterwards.
inline SearchResult run(const SearchConfig& cfg, llm::ChatClient& client, const RunnerRegistry& runners,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                        const std::optional<BenchEntry>& seed_override = std::nullopt,
                        const SearchHooks& hooks = {}) {
  cfg.validate();
  if (!seed_override && cfg.bench_set.empty()) fail(errc::invalid_argument, "no seed algorithm");
  detail::RunDir dir(out_dir);
  const auto& base = dir.base();
  const auto gen_dir = base / "generations";
  const auto trace_dir = base / "traces";
  const auto work_dir = base / "work";
  detail::write_json(base / "config.json", to_json(cfg));
  std::ofstream session(base / "session.jsonl", std::ios::binary | std::ios::trunc);

  const SuiteTask task = task_for(cfg.problem.suite);
  const BenchEntry seed_entry = seed_override ? *seed_override : cfg.bench_set.front();

  auto evaluate = [&](const CandidateSource& src, int t) {
    const auto path = materialize(src, work_dir, detail::gen_name(t));
    auto rep = fitness(src, path, cfg.problem, cfg.instances, cfg.eval_budget, runners, cfg.sandbox);
    std::filesystem::remove(path);
    detail::write_traces(trace_dir, t, rep);
    return rep;
  };

  SearchResult res;
  res.strategy = cfg.strategy;
  res.seed = {0, seed_entry.name, seed_entry.description, seed_entry.source, {}};
  detail::write_text(gen_dir / "000.src", seed_entry.source.source_text);
  res.seed.fitness = evaluate(seed_entry.source, 0);
  detail::write_json(gen_dir / "000.json", {{"t", 0},
                                            {"seed", seed_entry.name},
                                            {"description", seed_entry.description},
                                            {"entry", seed_entry.source.entry_name},
                                            {"fitness", bag::to_json(res.seed.fitness)}});
  res.incumbent = res.seed;

  std::mt19937_64 action_rng(derive_seed({cfg.rng_seed, 0xAC7104ULL}));
  BenchCycle cycle(derive_seed({cfg.rng_seed, 0xBE7C4ULL}));

  for (int t = 1; t <= cfg.query_budget; ++t) {
    CandidateRecord rec;
    rec.t = t;
    prompt::PromptContext ctx;
    ctx.suite_task = task;
    if (t == 1) {
      rec.initial = true;
      rec.action = {cfg.strategy == Strategy::create_only ? ActionKind::create : ActionKind::refine_best, 0};
      ctx.initial = true;
      ctx.selected_parent = prompt::Parent{res.incumbent.description, res.incumbent.fitness.mean_auc,
                                           res.incumbent.source.source_text};
    } else {
      switch (cfg.strategy) {
        case Strategy::bag: rec.action = next_action(t, cfg.q, action_rng, cycle, cfg.bench_set.size()); break;
        case Strategy::refine_only: rec.action = {ActionKind::refine_best, 0}; break;
        case Strategy::create_only: rec.action = {ActionKind::create, 0}; break;
      }
      if (rec.action.kind == ActionKind::refine_bench) {
        const auto& b = cfg.bench_set.at(rec.action.bench_index);
        ctx.selected_parent = prompt::Parent{b.description, 0.0, b.source.source_text};
      } else {
        ctx.population_summary = {
            {res.incumbent.source.entry_name, res.incumbent.description, res.incumbent.fitness.mean_auc}};
        ctx.selected_parent = prompt::Parent{res.incumbent.description, res.incumbent.fitness.mean_auc,
                                             res.incumbent.source.source_text};
      }
    }
    ctx.action = rec.action;

    const auto text = prompt::render(ctx, hooks.templates);
    const llm::ChatRequest req{cfg.model, {{"user", text}}, nlohmann::json::object()};
    rec.prompt_digest = llm::request_digest(req);

    std::optional<llm::ChatResponse> resp;
    try {
      resp = client.chat(req);
    } catch (const error& e) {
      if (e.code() != errc::provider_refusal) throw;
      rec.failure = std::string(bag::to_string(e.code())) + ": " + e.what();
    }
    if (resp) {
      session << llm::to_jsonl({rec.prompt_digest, resp->text, resp->usage}) << '\n' << std::flush;
      try {
        auto parsed = prompt::parse_response(resp->text);
        rec.description = std::move(parsed.description);
        rec.source = std::move(parsed.code);
      } catch (const error& e) {
        rec.failure = std::string(bag::to_string(e.code())) + ": " + e.what();
      }
    }

    if (rec.failure) {
      rec.fitness = detail::zero_report(cfg, *rec.failure);
    } else {
      detail::write_text(gen_dir / (detail::gen_name(t) + ".src"), rec.source.source_text);
      rec.fitness = evaluate(rec.source, t);
      if (rec.fitness.all_failed())
        rec.failure = "all runs failed: " + rec.fitness.per_instance.front().detail;
    }
    rec.accepted = !rec.failure && accept(rec.fitness, res.incumbent.fitness);
    if (rec.accepted)
      res.incumbent = {t, rec.source.entry_name, rec.description, rec.source, rec.fitness};
    res.best_so_far_series.push_back(res.incumbent.fitness.mean_auc);
    detail::write_json(gen_dir / (detail::gen_name(t) + ".json"), record_json(rec));
    if (hooks.on_record) hooks.on_record(rec, res.incumbent);
    res.records.push_back(std::move(rec));
  }

  detail::write_json(base / "result.json", result_json(res));
  return res;
}

inline SearchResult run_bag(SearchConfig cfg, llm::ChatClient& client, const RunnerRegistry& runners,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                            const SearchHooks& hooks = {}) {
  cfg.strategy = Strategy::bag;
  return run(cfg, client, runners, out_dir, std::nullopt, hooks);
}

inline SearchResult run_refine_only(SearchConfig cfg, const BenchEntry& seed, llm::ChatClient& client,
                                    const RunnerRegistry& runners,
                                    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                    const SearchHooks& hooks = {}) {
  cfg.strategy = Strategy::refine_only;
  return run(cfg, client, runners, out_dir, seed, hooks);
}

inline SearchResult run_create_only(SearchConfig cfg, llm::ChatClient& client, const RunnerRegistry& runners,
                                    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                    const SearchHooks& hooks = {}) {
  cfg.strategy = Strategy::create_only;
  return run(cfg, client, runners, out_dir, std::nullopt, hooks);
}

/// Loads a persisted run directory back into a SearchResult.
inline SearchResult load_run(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto summary = nlohmann::json::parse(read(dir / "result.json"));
  SearchResult res;
  res.strategy = parse_strategy(summary.at("strategy").get<std::string>());
  const auto gen = dir / "generations";

  const auto seed_json = nlohmann::json::parse(read(gen / "000.json"));
  res.seed.t = 0;
  res.seed.name = seed_json.at("seed").get<std::string>();
  res.seed.description = seed_json.value("description", std::string{});
  res.seed.source = {"python", read(gen / "000.src"), seed_json.value("entry", std::string{})};
  res.seed.fitness = fitness_from_json(seed_json.at("fitness"));
  res.incumbent = res.seed;

  const int n = static_cast<int>(summary.at("records").size());
  for (int t = 1; t <= n; ++t) {
    const auto name = detail::gen_name(t);
    const auto j = nlohmann::json::parse(read(gen / (name + ".json")));
    std::string src;
    if (std::filesystem::exists(gen / (name + ".src"))) src = read(gen / (name + ".src"));
    auto rec = record_from_json(j, std::move(src));
    if (rec.accepted) res.incumbent = {t, rec.source.entry_name, rec.description, rec.source, rec.fitness};
    res.records.push_back(std::move(rec));
  }
  res.best_so_far_series = summary.at("best_so_far_series").get<std::vector<double>>();
  return res;
}

}  // namespace bag::search
