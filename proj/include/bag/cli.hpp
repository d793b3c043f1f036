#pragma once

// Command-line front end. `dispatch` parses argv, runs one subcommand and
// returns the process exit code: 0 success, 1 runtime failure, 2 usage.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bag/analysis.hpp"
#include "bag/error.hpp"
#include "bag/evaluation.hpp"
#include "bag/llm.hpp"
#include "bag/problems.hpp"
#include "bag/sandbox.hpp"
#include "bag/search.hpp"

#ifndef BAG_ASSET_DIR
#define BAG_ASSET_DIR "assets"
#endif

namespace bag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Asset root: $BAG_ASSETS, else the build-time location.
inline fs::path asset_dir() {
  if (const char* env = std::getenv("BAG_ASSETS"); env && *env) return env;
  return BAG_ASSET_DIR;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

inline json read_json(const fs::path& p) {
  auto j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) fail(errc::invalid_argument, p.string() + " is not valid JSON");
  return j;
}

/// "1-5", "6,8,10" or "1-3,7".
inline std::vector<int> parse_instances(const std::string& spec) {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash)), hi = std::stoi(part.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(part);
        for (int k = lo; k <= hi; ++k) out.push_back(k);
      }
    } catch (const std::logic_error&) {
      fail(errc::invalid_argument, "bad instance list '" + spec + "'");
    }
  }
  if (out.empty()) fail(errc::invalid_argument, "empty instance list '" + spec + "'");
  for (int k : out)
    if (k < 1) fail(errc::invalid_argument, "instances start at 1");
  return out;
}

inline std::vector<int> instances_from_json(const json& j) {
  if (j.is_string()) return parse_instances(j.get<std::string>());
  return j.get<std::vector<int>>();
}

/// Reads `<dir>/bench.json`: [{"name", "file", "description"}, ...]. The
/// class name doubles as the entry point.
inline std::vector<search::BenchEntry> load_bench(const fs::path& dir) {
  const auto j = read_json(dir / "bench.json");
  std::vector<search::BenchEntry> out;
  for (const auto& e : j) {
    search::BenchEntry b;
    b.name = e.at("name").get<std::string>();
    b.description = e.value("description", std::string{});
    b.source = {"python", read_file(dir / e.at("file").get<std::string>()), e.value("entry", b.name)};
    out.push_back(std::move(b));
  }
  if (out.empty()) fail(errc::invalid_argument, "bench set in " + dir.string() + " is empty");
  return out;
}

inline RunnerRegistry default_runners() {
  RunnerRegistry r;
  r.add("python", {"python3", (asset_dir() / "shim" / "bag_shim.py").string(), "{source}", "{entry}"});
  return r;
}

/// Inline JSON object or a path to one.
inline RunnerRegistry load_runners(const std::string& spec) {
  if (spec.empty()) return default_runners();
  const auto first = spec.find_first_not_of(" \t\n");
  const json j = first != std::string::npos && spec[first] == '{' ? json::parse(spec) : read_json(spec);
  return RunnerRegistry::from_json(j);
}

/// "replay:<session.jsonl>" or a provider config JSON path.
inline std::unique_ptr<llm::ChatClient> make_client(const std::string& spec, std::string* model, std::ostream& err) {
  if (spec.rfind("replay:", 0) == 0) {
    const fs::path path = spec.substr(7);
    return std::make_unique<llm::ReplayClient>(llm::ReplaySession::load(path, true), "replay:" + path.string());
  }
  const auto cfg = read_json(spec).get<llm::ProviderConfig>();
  *model = cfg.model;
  return std::make_unique<llm::HttpChatClient>(cfg, llm::HttpChatClient::Sleeper{},
                                               [&err](const std::string& m) { err << m << '\n'; });
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- run

/// Settings for `run`, layered: built-in defaults, then a config file, then
/// flags.
struct RunSettings {
  search::Strategy strategy = search::Strategy::bag;
  Suite suite = Suite::pbo;
  int function = 1;
  std::optional<int> dim;
  std::vector<int> instances{1, 2, 3, 4, 5};
  std::optional<std::int64_t> eval_budget;
  int query_budget = 100;
  int q = 10;
  std::uint64_t seed = 0;
  std::string llm;
  std::string runners;
  std::string bench_dir;
  std::string seed_algorithm;
  std::string templates_dir;
  double timeout_s = 600.0;
  double cpu_cap_s = 3000.0;
  int runs_per_instance = 1;
  int parallelism = 1;
  std::string out;

  int resolved_dim() const { return dim.value_or(suite == Suite::pbo ? 100 : 5); }
  std::int64_t resolved_budget() const { return eval_budget.value_or(suite == Suite::pbo ? 1000000 : 10000); }

  void apply(const json& j) {
    for (const auto& [k, v] : j.items()) {
      if (k == "strategy") strategy = search::parse_strategy(v.get<std::string>());
      else if (k == "suite") suite = parse_suite(v.get<std::string>());
      else if (k == "function") function = v.get<int>();
      else if (k == "dim") dim = v.get<int>();
      else if (k == "instances") instances = instances_from_json(v);
      else if (k == "eval_budget") eval_budget = v.get<std::int64_t>();
      else if (k == "query_budget") query_budget = v.get<int>();
      else if (k == "q") q = v.get<int>();
      else if (k == "seed") seed = v.get<std::uint64_t>();
      else if (k == "llm") llm = v.get<std::string>();
      else if (k == "runners") runners = v.is_string() ? v.get<std::string>() : v.dump();
      else if (k == "bench") bench_dir = v.get<std::string>();
      else if (k == "seed_algorithm") seed_algorithm = v.get<std::string>();
      else if (k == "templates") templates_dir = v.get<std::string>();
      else if (k == "timeout") timeout_s = v.get<double>();
      else if (k == "cpu_cap") cpu_cap_s = v.get<double>();
      else if (k == "runs_per_instance") runs_per_instance = v.get<int>();
      else if (k == "parallelism") parallelism = v.get<int>();
      else if (k == "out") out = v.get<std::string>();
      else fail(errc::invalid_argument, "unknown config key '" + k + "'");
    }
  }
};

inline int run_command(const RunSettings& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = s.out;
  if (fs::exists(dir) && !fs::is_empty(dir)) fail(errc::io_error, dir.string() + " already exists and is not empty");

  search::SearchConfig cfg;
  cfg.strategy = s.strategy;
  cfg.problem = {s.suite, s.function, 1, s.resolved_dim()};
  make_instance(cfg.problem);  // rejects unknown functions and dimensions early
  cfg.instances = s.instances;
  cfg.eval_budget = s.resolved_budget();
  cfg.query_budget = s.query_budget;
  cfg.q = s.q;
  cfg.rng_seed = s.seed;
  cfg.sandbox.timeout_s = s.timeout_s;
  cfg.sandbox.cpu_cap_s = s.cpu_cap_s;
  cfg.sandbox.runs_per_instance = s.runs_per_instance;
  cfg.sandbox.parallelism = s.parallelism;
  cfg.bench_set = load_bench(s.bench_dir.empty() ? asset_dir() / "bench" / to_string(s.suite) : fs::path(s.bench_dir));

  std::optional<search::BenchEntry> seed_entry;
  if (!s.seed_algorithm.empty()) {
    auto it = std::find_if(cfg.bench_set.begin(), cfg.bench_set.end(),
                           [&](const auto& b) { return b.name == s.seed_algorithm; });
    if (it == cfg.bench_set.end()) fail(errc::invalid_argument, "no bench algorithm named " + s.seed_algorithm);
    seed_entry = *it;
  }
  const auto runners = load_runners(s.runners);
  search::SearchHooks hooks;
  if (!s.templates_dir.empty()) hooks.templates = prompt::Templates::from_directory(s.templates_dir);
  std::string model;
  auto client = make_client(s.llm, &model, err);
  cfg.model = model;
  cfg.validate();

  fs::create_directories(dir);
  json manifest = {{"tool", "bag"},
                   {"version", kVersion},
                   {"config", search::to_json(cfg)},
                   {"provider", client->identity()},
                   {"started_at", utc_now()},
                   {"status", "running"}};
  search::detail::write_json(dir / "manifest.json", manifest);
  auto finalize = [&](const std::string& status, const std::string& detail) {
    manifest["status"] = status;
    manifest["finished_at"] = utc_now();
    if (!detail.empty()) manifest["error"] = detail;
    search::detail::write_json(dir / "manifest.json", manifest);
  };

  hooks.on_record = [&err](const search::CandidateRecord& r, const search::Incumbent& inc) {
    err << "[" << search::detail::gen_name(r.t) << "] " << to_string(r.action.kind) << " auc=" << r.fitness.mean_auc
        << (r.accepted ? " accepted" : "") << (r.failure ? " failed: " + *r.failure : "")
        << " best=" << inc.fitness.mean_auc << '\n';
  };

  search::SearchResult res;
  try {
    if (s.strategy == search::Strategy::refine_only)
      res = search::run_refine_only(cfg, seed_entry.value_or(cfg.bench_set.front()), *client, runners, dir, hooks);
    else if (seed_entry)
      res = search::run(cfg, *client, runners, dir, seed_entry, hooks);
    else
      res = search::run(cfg, *client, runners, dir, std::nullopt, hooks);
  } catch (const std::exception& e) {
    finalize("failed", e.what());
    throw;
  }
  if (res.incumbent.fitness.mean_auc < res.seed.fitness.mean_auc) {
    finalize("failed", "final incumbent is worse than the seed");
    fail(errc::invalid_argument, "elitism violated");
  }
  finalize("completed", "");
  out << "seed " << res.seed.name << " auc=" << res.seed.fitness.mean_auc << "\n"
      << "best " << res.incumbent.name << " (t=" << res.incumbent.t << ") auc=" << res.incumbent.fitness.mean_auc
      << "\n"
      << "failure_rate " << analysis::failure_rate(res) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalSettings {
  std::string run_dir;
  std::string candidate = "incumbent";
  std::string source_file, entry;
  std::optional<std::string> suite;
  int function = 1;
  std::optional<int> dim;
  std::optional<std::int64_t> eval_budget;
  std::string instances;
  std::string runners;
  std::optional<int> runs_per_instance;
  std::optional<int> parallelism;
  std::optional<double> timeout_s;
  std::string out;
};

inline int eval_command(const EvalSettings& s, std::ostream& out) {
  CandidateSource src;
  ProblemId base;
  std::vector<int> instances{1, 2, 3, 4, 5};
  std::int64_t budget = 0;
  FitnessOptions opts;

  if (!s.run_dir.empty()) {
    const fs::path dir = s.run_dir;
    const auto cfg = read_json(dir / "config.json");
    base = cfg.at("problem").get<ProblemId>();
    instances = cfg.at("instances").get<std::vector<int>>();
    budget = cfg.at("eval_budget").get<std::int64_t>();
    const auto& sb = cfg.at("sandbox");
    opts.timeout_s = sb.value("timeout_s", opts.timeout_s);
    opts.cpu_cap_s = sb.value("cpu_cap_s", opts.cpu_cap_s);
    opts.runs_per_instance = sb.value("runs_per_instance", opts.runs_per_instance);
    opts.grid_points = sb.value("grid_points", opts.grid_points);
    opts.parallelism = sb.value("parallelism", opts.parallelism);
    const auto run = search::load_run(dir);
    if (s.candidate == "incumbent") {
      src = run.incumbent.source;
    } else if (s.candidate == "seed") {
      src = run.seed.source;
    } else {
      int t = 0;
      try {
        t = std::stoi(s.candidate);
      } catch (const std::logic_error&) {
        fail(errc::invalid_argument, "--candidate must be incumbent, seed or a generation number");
      }
      if (t == 0) {
        src = run.seed.source;
      } else {
        if (t < 1 || t > static_cast<int>(run.records.size()))
          fail(errc::invalid_argument, "no generation " + s.candidate);
        const auto& rec = run.records[static_cast<std::size_t>(t - 1)];
        if (rec.failure) fail(errc::invalid_argument, "generation " + s.candidate + " has no runnable code");
        src = rec.source;
      }
    }
  } else {
    if (s.source_file.empty() || s.entry.empty() || !s.suite)
      fail(errc::invalid_argument, "give a run directory or --source, --entry and --suite");
    base.suite = parse_suite(*s.suite);
    base.function = s.function;
    base.dim = s.dim.value_or(base.suite == Suite::pbo ? 100 : 5);
    budget = base.suite == Suite::pbo ? 1000000 : 10000;
    src = {"python", read_file(s.source_file), s.entry};
  }
  if (s.suite && !s.run_dir.empty()) fail(errc::invalid_argument, "--suite only applies with --source");
  if (s.dim) base.dim = *s.dim;
  if (s.eval_budget) budget = *s.eval_budget;
  if (!s.instances.empty()) instances = parse_instances(s.instances);
  if (s.runs_per_instance) opts.runs_per_instance = *s.runs_per_instance;
  if (s.parallelism) opts.parallelism = *s.parallelism;
  if (s.timeout_s) opts.timeout_s = *s.timeout_s;
  validate(src);

  const auto runners = load_runners(s.runners);
  const fs::path work = fs::temp_directory_path() / ("bag_eval_" + std::to_string(::getpid()));
  const auto path = materialize(src, work);
  FitnessReport rep;
  try {
    rep = fitness(src, path, base, instances, budget, runners, opts);
  } catch (...) {
    fs::remove_all(work);
    throw;
  }
  fs::remove_all(work);

  json j = to_json(rep);
  j["entry"] = src.entry_name;
  j["eval_budget"] = budget;
  if (!s.out.empty()) search::detail::write_json(s.out, j);
  out << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- auc

/// AUC of each trace file (one instance, one or more runs per file) and
/// their mean. A file holding a failed run scores 0, as in fitness.
inline int auc_command(std::vector<std::string> files, const std::string& run_dir, std::optional<int> gen,
                       int grid_points, std::ostream& out) {
  if (!run_dir.empty()) {
    if (!gen) fail(errc::invalid_argument, "--run needs --t");
    const auto cfg = read_json(fs::path(run_dir) / "config.json");
    for (int k : cfg.at("instances").get<std::vector<int>>())
      files.push_back((fs::path(run_dir) / "traces" /
                       (search::detail::gen_name(*gen) + "_inst" + std::to_string(k) + ".jsonl"))
                          .string());
    if (cfg.contains("sandbox")) grid_points = cfg["sandbox"].value("grid_points", grid_points);
  }
  if (files.empty()) fail(errc::invalid_argument, "no trace files given");
  json per = json::array();
  double sum = 0.0;
  for (const auto& f : files) {
    // Unparsable generations were never run and have no traces.
    if (!run_dir.empty() && !fs::exists(f)) {
      per.push_back({{"file", f}, {"auc", 0.0}, {"status", "not_run"}, {"runs", 0}});
      continue;
    }
    std::ifstream in(f, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot read " + f);
    const auto traces = read_traces(in);
    double value = 0.0;
    std::string status = "empty";
    if (!traces.empty()) {
      status = to_string(traces.front().status);
      bool failed = false;
      for (const auto& tr : traces)
        if (is_failure(tr.status)) {
          failed = true;
          status = to_string(tr.status);
        }
      if (!failed) {
        const auto inst = make_instance(traces.front().problem);
        value = auc(traces, target_set(inst), log_time_grid(traces.front().budget, grid_points)).auc;
      }
    }
    sum += value;
    per.push_back({{"file", f}, {"auc", value}, {"status", status}, {"runs", traces.size()}});
  }
  out << json{{"per_file", per}, {"mean_auc", sum / static_cast<double>(files.size())}}.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- report

inline int report_command(const std::vector<std::string>& runs, const std::string& table_file,
                          const std::string& order, const std::string& out_dir, std::ostream& out) {
  if (runs.empty() && table_file.empty()) fail(errc::invalid_argument, "give run directories or --table");
  if (!out_dir.empty()) fs::create_directories(out_dir);
  auto emit = [&](const std::string& name, const std::string& text) {
    if (out_dir.empty()) {
      out << text;
    } else {
      search::detail::write_text(fs::path(out_dir) / name, text);
      out << "wrote " << (fs::path(out_dir) / name).string() << '\n';
    }
  };

  if (!table_file.empty()) {
    const auto j = read_json(table_file);
    std::map<std::string, std::map<std::string, double>> results;
    for (const auto& [approach, row] : j.items())
      for (const auto& [problem, v] : row.items()) results[approach][problem] = v.get<double>();
    std::vector<std::string> names;
    if (!order.empty()) {
      std::stringstream ss(order);
      for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
    }
    emit("table.csv", analysis::report_table(results, names).to_csv());
  }

  if (!runs.empty()) {
    std::vector<search::SearchResult> loaded;
    for (const auto& r : runs) {
      if (!fs::is_directory(r)) fail(errc::io_error, "no run directory " + r);
      loaded.push_back(search::load_run(r));
    }
    std::string summary = "run,strategy,queries,seed_auc,final_auc,failure_rate\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& res = loaded[k];
      char buf[128];
      std::snprintf(buf, sizeof buf, ",%s,%zu,%.6f,%.6f,%.4f\n", search::to_string(res.strategy).c_str(),
                    res.records.size(), res.seed.fitness.mean_auc, res.incumbent.fitness.mean_auc,
                    analysis::failure_rate(res));
      summary += analysis::csv_field(runs[k]) + buf;
    }
    emit("summary.csv", summary);
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto name = runs.size() == 1 ? std::string("convergence.csv")
                                         : fs::path(runs[k]).filename().string() + "_convergence.csv";
      if (!out_dir.empty()) emit(name, analysis::convergence_csv(loaded[k]));
    }
  }
  return 0;
}

// ---------------------------------------------------------------- simmatrix

inline int simmatrix_command(std::vector<std::string> files, const std::string& run_dir, bool all_generations,
                             const std::string& lambdas, const std::string& python, bool no_syntax,
                             const std::string& out_file, std::ostream& out) {
  std::vector<std::string> codes;
  std::vector<std::string> labels;
  if (!run_dir.empty()) {
    const auto res = search::load_run(run_dir);
    codes.push_back(res.seed.source.source_text);
    labels.push_back("000");
    for (const auto& r : res.records)
      if (!r.failure && (all_generations || r.accepted)) {
        codes.push_back(r.source.source_text);
        labels.push_back(search::detail::gen_name(r.t));
      }
  }
  for (const auto& f : files) {
    codes.push_back(read_file(f));
    labels.push_back(f);
  }
  analysis::CodeBleuOptions opts;
  if (!lambdas.empty()) {
    std::stringstream ss(lambdas);
    std::string part;
    std::size_t k = 0;
    while (std::getline(ss, part, ',')) {
      if (k >= 4) fail(errc::invalid_argument, "--lambdas takes four values");
      try {
        opts.lambdas[k++] = std::stod(part);
      } catch (const std::logic_error&) {
        fail(errc::invalid_argument, "bad --lambdas value '" + part + "'");
      }
    }
    if (k != 4) fail(errc::invalid_argument, "--lambdas takes four values");
  }
  analysis::PythonFrontend frontend(python);
  const auto m = analysis::similarity_matrix(codes, opts, no_syntax ? nullptr : &frontend);
  std::string csv = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) csv += std::to_string(i) + "," + analysis::csv_field(labels[i]) + "\n";
  csv += "\n" + m.to_csv();
  std::set<std::string> warnings;
  for (const auto& [ij, s] : m.cells)
    for (const auto& w : s.warnings) warnings.insert(w);
  if (out_file.empty()) {
    out << csv;
  } else {
    search::detail::write_text(out_file, csv);
    out << "wrote " << out_file << '\n';
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------- attn

inline int attn_command(const std::string& file, const std::string& out_file, std::ostream& out) {
  const auto m = analysis::load_relevance(file);
  const auto scores = analysis::aggregate_relevance(m);
  std::string csv = "index,token,component,relevance\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", scores[i]);
    csv += std::to_string(i) + "," + analysis::csv_field(m.input_tokens[i]) + "," +
           analysis::csv_field(m.component_of.empty() ? "" : m.components[m.component_of[i]]) + "," + buf + "\n";
  }
  if (!m.component_of.empty()) {
    csv += "\ncomponent,tokens,mean_relevance\n";
    for (const auto& c : analysis::component_relevance(m)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.6f", c.mean);
      csv += analysis::csv_field(c.name) + "," + std::to_string(c.tokens) + "," + buf + "\n";
    }
  }
  if (out_file.empty()) {
    out << csv;
  } else {
    search::detail::write_text(out_file, csv);
    out << "wrote " << out_file << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- dispatch

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Benchmark-assisted LLM-driven black-box algorithm search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // run
  auto* run = app.add_subcommand("run", "Search for an algorithm with an LLM");
  std::string config_file, strategy, suite, instances, llm_spec, runners, bench, seed_alg, templates, out_dir;
  int function = 0, dim = 0, query_budget = 0, q = 0, runs = 0, par = 0;
  std::int64_t eval_budget = 0;
  std::uint64_t seed = 0;
  double timeout = 0, cpu_cap = 0;
  run->add_option("--config", config_file, "JSON file with run settings")->check(CLI::ExistingFile);
  run->add_option("--strategy", strategy, "bag | refine-only | create-only")
      ->check(CLI::IsMember({"bag", "refine-only", "create-only"}));
  run->add_option("--suite", suite, "pbo | bbob")->check(CLI::IsMember({"pbo", "bbob"}));
  run->add_option("--function", function, "Function index")->check(CLI::PositiveNumber);
  run->add_option("--dim", dim, "Dimension (pbo 100, bbob 5)")->check(CLI::PositiveNumber);
  run->add_option("--instances", instances, "Instances, e.g. 1-5");
  run->add_option("--eval-budget", eval_budget, "Evaluations per run (pbo 1e6, bbob 1e4)")
      ->check(CLI::PositiveNumber);
  run->add_option("--query-budget", query_budget, "LLM queries")->check(CLI::PositiveNumber);
  run->add_option("--q", q, "Bench refinement period")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Search RNG seed");
  run->add_option("--llm", llm_spec, "replay:<session.jsonl> or provider config JSON");
  run->add_option("--runners", runners, "Runner table: JSON file or inline object");
  run->add_option("--bench", bench, "Bench directory with bench.json");
  run->add_option("--seed-algorithm", seed_alg, "Bench algorithm to start from");
  run->add_option("--templates", templates, "Directory overriding prompt templates");
  run->add_option("--timeout", timeout, "Seconds per evaluation run")->check(CLI::PositiveNumber);
  run->add_option("--cpu-cap", cpu_cap, "CPU seconds per problem")->check(CLI::PositiveNumber);
  run->add_option("--runs-per-instance", runs, "Independent runs per instance")->check(CLI::PositiveNumber);
  run->add_option("--parallelism", par, "Concurrent evaluation runs")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Run directory to create");

  // eval
  auto* ev = app.add_subcommand("eval", "Re-evaluate a stored candidate");
  EvalSettings es;
  std::string ev_suite;
  int ev_dim = 0, ev_runs = 0, ev_par = 0;
  std::int64_t ev_budget = 0;
  double ev_timeout = 0;
  ev->add_option("run_dir", es.run_dir, "Run directory");
  ev->add_option("--candidate", es.candidate, "incumbent | seed | generation number");
  ev->add_option("--source", es.source_file, "Candidate source file")->check(CLI::ExistingFile);
  ev->add_option("--entry", es.entry, "Entry class name");
  ev->add_option("--suite", ev_suite, "pbo | bbob")->check(CLI::IsMember({"pbo", "bbob"}));
  ev->add_option("--function", es.function, "Function index")->check(CLI::PositiveNumber);
  ev->add_option("--dim", ev_dim, "Dimension")->check(CLI::PositiveNumber);
  ev->add_option("--eval-budget", ev_budget, "Evaluations per run")->check(CLI::PositiveNumber);
  ev->add_option("--instances", es.instances, "Instances, e.g. 6-10");
  ev->add_option("--runners", es.runners, "Runner table: JSON file or inline object");
  ev->add_option("--runs-per-instance", ev_runs, "Independent runs per instance")->check(CLI::PositiveNumber);
  ev->add_option("--parallelism", ev_par, "Concurrent evaluation runs")->check(CLI::PositiveNumber);
  ev->add_option("--timeout", ev_timeout, "Seconds per evaluation run")->check(CLI::PositiveNumber);
  ev->add_option("--out", es.out, "Also write the report to this file");

  // auc
  auto* au = app.add_subcommand("auc", "AUC from trace files");
  std::vector<std::string> trace_files;
  std::string au_run;
  int au_t = -1, grid = kDefaultGridSize;
  au->add_option("files", trace_files, "Trace files, one instance each");
  au->add_option("--run", au_run, "Run directory");
  au->add_option("--t", au_t, "Generation in --run")->check(CLI::NonNegativeNumber);
  au->add_option("--grid-points", grid, "Time grid size")->check(CLI::PositiveNumber);

  // report
  auto* rep = app.add_subcommand("report", "Summaries, convergence series and rank tables");
  std::vector<std::string> rep_runs;
  std::string rep_table, rep_order, rep_out;
  rep->add_option("runs", rep_runs, "Run directories");
  rep->add_option("--table", rep_table, "JSON {approach: {problem: auc}}");
  rep->add_option("--order", rep_order, "Comma-separated approach order");
  rep->add_option("--out", rep_out, "Directory for CSV files");

  // simmatrix
  auto* sim = app.add_subcommand("simmatrix", "Pairwise CodeBLEU over a lineage");
  std::vector<std::string> sim_files;
  std::string sim_run, sim_lambdas, sim_python = "python3", sim_out;
  bool sim_all = false, sim_no_syntax = false;
  sim->add_option("files", sim_files, "Source files in lineage order");
  sim->add_option("--run", sim_run, "Run directory: seed then accepted generations");
  sim->add_flag("--all", sim_all, "With --run, include every runnable generation");
  sim->add_option("--lambdas", sim_lambdas, "Four weights, e.g. 0.25,0.25,0.25,0.25");
  sim->add_option("--python", sim_python, "Interpreter for the syntax frontend");
  sim->add_flag("--no-syntax", sim_no_syntax, "Token components only");
  sim->add_option("--out", sim_out, "CSV output file");

  // attn
  auto* at = app.add_subcommand("attn", "Aggregate token relevance scores");
  std::string at_file, at_out;
  at->add_option("file", at_file, "Relevance matrix (CSV or JSON)")->required();
  at->add_option("--out", at_out, "CSV output file");

  // bench list
  auto* bn = app.add_subcommand("bench", "Bench algorithm sets");
  bn->require_subcommand(1);
  auto* bl = bn->add_subcommand("list", "List bench algorithms");
  std::string bl_suite, bl_dir;
  bl->add_option("--suite", bl_suite, "pbo | bbob")->check(CLI::IsMember({"pbo", "bbob"}));
  bl->add_option("--bench", bl_dir, "Bench directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      RunSettings s;
      if (!config_file.empty()) s.apply(read_json(config_file));
      if (run->count("--strategy")) s.strategy = search::parse_strategy(strategy);
      if (run->count("--suite")) s.suite = parse_suite(suite);
      if (run->count("--function")) s.function = function;
      if (run->count("--dim")) s.dim = dim;
      if (run->count("--instances")) s.instances = parse_instances(instances);
      if (run->count("--eval-budget")) s.eval_budget = eval_budget;
      if (run->count("--query-budget")) s.query_budget = query_budget;
      if (run->count("--q")) s.q = q;
      if (run->count("--seed")) s.seed = seed;
      if (run->count("--llm")) s.llm = llm_spec;
      if (run->count("--runners")) s.runners = runners;
      if (run->count("--bench")) s.bench_dir = bench;
      if (run->count("--seed-algorithm")) s.seed_algorithm = seed_alg;
      if (run->count("--templates")) s.templates_dir = templates;
      if (run->count("--timeout")) s.timeout_s = timeout;
      if (run->count("--cpu-cap")) s.cpu_cap_s = cpu_cap;
      if (run->count("--runs-per-instance")) s.runs_per_instance = runs;
      if (run->count("--parallelism")) s.parallelism = par;
      if (run->count("--out")) s.out = out_dir;
      for (auto [flag, value] : {std::pair{"--out", &s.out}, std::pair{"--llm", &s.llm}})
        if (value->empty()) {
          err << flag << " is required\n";
          return 2;
        }
      return run_command(s, out, err);
    }
    if (*ev) {
      if (ev->count("--suite")) es.suite = ev_suite;
      if (ev->count("--dim")) es.dim = ev_dim;
      if (ev->count("--eval-budget")) es.eval_budget = ev_budget;
      if (ev->count("--runs-per-instance")) es.runs_per_instance = ev_runs;
      if (ev->count("--parallelism")) es.parallelism = ev_par;
      if (ev->count("--timeout")) es.timeout_s = ev_timeout;
      return eval_command(es, out);
    }
    if (*au) return auc_command(trace_files, au_run, au_t >= 0 ? std::optional(au_t) : std::nullopt, grid, out);
    if (*rep) return report_command(rep_runs, rep_table, rep_order, rep_out, out);
    if (*sim)
      return simmatrix_command(sim_files, sim_run, sim_all, sim_lambdas, sim_python, sim_no_syntax, sim_out, out);
    if (*at) return attn_command(at_file, at_out, out);
    if (*bl) {
      std::vector<std::pair<std::string, fs::path>> sets;
      if (!bl_dir.empty()) sets.emplace_back(bl_dir, bl_dir);
      for (const char* sname : {"pbo", "bbob"})
        if (bl_dir.empty() && (bl_suite.empty() || bl_suite == sname))
          sets.emplace_back(sname, asset_dir() / "bench" / sname);
      for (const auto& [label, path] : sets) {
        const auto entries = load_bench(path);
        for (std::size_t k = 0; k < entries.size(); ++k)
          out << label << '\t' << k + 1 << '\t' << entries[k].name << '\t' << entries[k].description << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace bag::cli
