#pragma once

// Prompt rendering and response parsing for the generation loop.
//
// A prompt is assembled from named template pieces in a fixed order:
//   role, task, [parent block], reference intro + fenced code, [strategy],
//   expected output.
// Built-in templates are compiled in; a template directory may override any
// subset of them file by file (<name>.txt).

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bag/error.hpp"
#include "bag/problems.hpp"
#include "bag/sandbox.hpp"

namespace bag {

enum class SuiteTask { pbo_task, bbob_task };

inline SuiteTask task_for(Suite s) { return s == Suite::pbo ? SuiteTask::pbo_task : SuiteTask::bbob_task; }

enum class ActionKind { refine_bench, refine_best, create };

struct Action {
  ActionKind kind = ActionKind::refine_best;
  std::size_t bench_index = 0;  // meaningful for refine_bench only

  friend bool operator==(const Action&, const Action&) = default;
};

inline std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::refine_bench: return "RefineBench";
    case ActionKind::refine_best: return "RefineBest";
    case ActionKind::create: return "Create";
  }
  return "?";
}

inline ActionKind parse_action_kind(std::string_view s) {
  if (s == "RefineBench") return ActionKind::refine_bench;
  if (s == "RefineBest") return ActionKind::refine_best;
  if (s == "Create") return ActionKind::create;
  fail(errc::invalid_argument, "unknown action '" + std::string(s) + "'");
}

inline void to_json(nlohmann::json& j, const Action& a) {
  j = {{"kind", to_string(a.kind)}};
  if (a.kind == ActionKind::refine_bench) j["bench_index"] = a.bench_index;
}

inline void from_json(const nlohmann::json& j, Action& a) {
  a.kind = parse_action_kind(j.at("kind").get<std::string>());
  a.bench_index = j.value("bench_index", std::size_t{0});
}

namespace prompt {

struct PopulationEntry {
  std::string name;
  std::string description;
  double score = 0.0;
};

struct Parent {
  std::string description;
  double score = 0.0;
  std::string source_text;
};

struct PromptContext {
  SuiteTask suite_task = SuiteTask::pbo_task;
  std::vector<PopulationEntry> population_summary;
  /// The incumbent for refine_best/create; the benchmark code for
  /// refine_bench and for the initial prompt.
  std::optional<Parent> selected_parent;
  Action action;
  /// Initial prompt: no parent block, the parent's code is shown as the
  /// reference example with the benchmark-refinement instruction.
  bool initial = false;
};

struct ParsedResponse {
  std::string description;
  CandidateSource code;
};

inline const std::vector<std::string>& template_names() {
  static const std::vector<std::string> names{
      "role",           "task_pbo",        "task_bbob",
      "parent_block",   "strategy_refine", "strategy_create",
      "strategy_refine_bench", "expected_output", "reference_intro_bench",
      "reference_intro_baseline"};
  return names;
}

inline const std::map<std::string, std::string>& builtin_templates() {
  static const std::map<std::string, std::string> t{
      {"role",
       "You are an excellent Python programmer. You are a Python expert working on a new optimization algorithm."},
      {"task_pbo",
       "Your task is to develop a novel heuristic optimization algorithm for pseudo-boolean maximization problems.\n"
       "The optimization algorithm should work on different instances of noiseless unconstrained functions. Your "
       "task is to write the optimization algorithm in Python code.\n"
       "Each optimization problem has a search space consisting of binary decision variables that can take values 0 "
       "or 1. The dimensionality can be varied.\n"
       "\n"
       "The code should contain an `__init__(self, budget, dim, seed)` function with optional additional arguments "
       "and the function `def __call__(self, func)`, which should optimize the black box function `func` using "
       "`self.budget` function evaluations.\n"
       "The func() can only be called as many times as the budget allows, not more."},
      {"task_bbob",
       "Your task is to write a heuristic optimization algorithm for continuous problems. The optimization algorithm "
       "should work on different instances of noiseless unconstrained functions. Your task is to write an "
       "optimization algorithm in Python.\n"
       "Each of the optimization functions has a search space between -5.0 (lower bound) and 5.0 (upper bound). The "
       "dimensionality can be varied.\n"
       "\n"
       "The code should contain an `__init__(self, budget, dim, seed)` function with optional additional arguments "
       "and the function `def __call__(self, func)`, which should optimize the black box function `func` using "
       "`self.budget` function evaluations.\n"
       "The func() can only be called as many times as the budget allows, not more."},
      {"parent_block",
       "The current population of algorithms already evaluated (name, description, score) is:\n"
       "{population}\n"
       "\n"
       "The selected solution to update is:\n"
       "{description}\n"
       "\n"
       "With code:"},
      {"strategy_refine", "Refine the strategy of the selected solution to improve it."},
      {"strategy_create", "Generate a new algorithm that is different from the algorithms you have tried before."},
      {"strategy_refine_bench",
       "Refine the example algorithm to improve its performance on the given task. Focus only on algorithmic "
       "changes, not formatting or comments."},
      {"expected_output",
       "Provide the Python code and also give it a one-line description, describing the main idea. Give the "
       "response in the format:\n"
       "# Description: <short-description>\n"
       "# Code:\n"
       "```python\n"
       "<code>\n"
       "```"},
      {"reference_intro_bench", "An example of such code for a good optimization algorithm is as follows:"},
      {"reference_intro_baseline", "An example of such code (a simple random search), is as follows:"},
  };
  return t;
}

namespace detail {

inline std::string rtrim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

inline std::string score_str(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace detail

class Templates {
 public:
  Templates() : text_(builtin_templates()) {}

  /// Built-ins overlaid with every <name>.txt present in `dir`. Unknown
  /// files are ignored; trailing whitespace is stripped.
  static Templates from_directory(const std::filesystem::path& dir) {
    Templates t;
    for (const auto& name : template_names()) {
      const auto path = dir / (name + ".txt");
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      if (!in) fail(errc::io_error, "cannot read " + path.string());
      std::stringstream ss;
      ss << in.rdbuf();
      t.text_[name] = detail::rtrim(ss.str());
    }
    return t;
  }

  const std::string& get(const std::string& name) const {
    auto it = text_.find(name);
    if (it == text_.end()) fail(errc::invalid_argument, "unknown template '" + name + "'");
    return it->second;
  }

  void set(const std::string& name, std::string text) {
    get(name);
    text_[name] = std::move(text);
  }

 private:
  std::map<std::string, std::string> text_;
};

inline std::string fence(const std::string& code) { return "```python\n" + code + "\n```"; }

inline std::string render(const PromptContext& ctx, const Templates& tpl = Templates{}) {
  if (!ctx.selected_parent) {
    const char* what = ctx.initial ? "initial prompt needs a reference code"
                       : ctx.action.kind == ActionKind::refine_bench ? "RefineBench needs the benchmark code"
                                                                     : "action needs a selected parent";
    fail(errc::missing_parent, what);
  }
  const Parent& parent = *ctx.selected_parent;
  const bool bench_form = ctx.initial || ctx.action.kind == ActionKind::refine_bench;

  std::vector<std::string> parts;
  parts.push_back(tpl.get("role"));
  parts.push_back(tpl.get(ctx.suite_task == SuiteTask::pbo_task ? "task_pbo" : "task_bbob"));
  if (bench_form) {
    parts.push_back(tpl.get("reference_intro_bench"));
    parts.push_back(fence(parent.source_text));
    parts.push_back(tpl.get("strategy_refine_bench"));
  } else {
    std::string population;
    for (const auto& e : ctx.population_summary) {
      if (!population.empty()) population += '\n';
      population += e.name + ": " + e.description + " (Score: " + detail::score_str(e.score) + ")";
    }
    std::string block = tpl.get("parent_block");
    detail::replace_all(block, "{population}", population);
    detail::replace_all(block, "{description}", parent.description);
    parts.push_back(block);
    parts.push_back(fence(parent.source_text));
    parts.push_back(tpl.get(ctx.action.kind == ActionKind::create ? "strategy_create" : "strategy_refine"));
  }
  parts.push_back(tpl.get("expected_output"));

  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "\n\n";
    out += p;
  }
  return out;
}

/// First class definition's name, or empty.
inline std::string first_class_name(std::string_view code) {
  for (auto line : detail::split_lines(code)) {
    const auto t = detail::trim(line);
    if (t.rfind("class ", 0) != 0) continue;
    std::size_t i = 6;
    while (i < t.size() && t[i] == ' ') ++i;
    std::size_t j = i;
    while (j < t.size() && (std::isalnum(static_cast<unsigned char>(t[j])) || t[j] == '_')) ++j;
    auto name = t.substr(i, j - i);
    if (is_identifier(name)) return name;
  }
  return {};
}

inline ParsedResponse parse_response(std::string_view text) {
  const auto lines = detail::split_lines(text);
  ParsedResponse out;

  bool have_desc = false;
  for (auto line : lines) {
    const auto t = detail::trim(line);
    if (t.empty() || t[0] != '#') continue;
    const auto body = detail::trim(std::string_view(t).substr(1));
    if (body.rfind("Description:", 0) == 0) {
      out.description = detail::trim(std::string_view(body).substr(12));
      have_desc = true;
      break;
    }
  }
  if (!have_desc || out.description.empty()) fail(errc::no_description, "response has no '# Description:' line");

  std::optional<std::size_t> open;
  std::optional<std::size_t> close;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto t = detail::trim(lines[i]);
    if (t.rfind("```", 0) != 0) continue;
    if (!open) {
      // Opening fence: optional language annotation, nothing else.
      const auto tag = detail::trim(std::string_view(t).substr(3));
      if (tag.find_first_of(" `") != std::string::npos) continue;
      open = i;
    } else if (t == "```") {
      close = i;
      break;
    }
  }
  if (!open || !close) fail(errc::no_code_block, "response has no fenced code block");

  std::string code;
  for (std::size_t i = *open + 1; i < *close; ++i) {
    if (i > *open + 1) code += '\n';
    code += lines[i];
  }
  if (detail::trim(code).empty()) fail(errc::empty_code, "fenced code block is empty");
  auto entry = first_class_name(code);
  if (entry.empty()) fail(errc::empty_code, "code defines no class");
  out.code = CandidateSource{"python", std::move(code), std::move(entry)};
  return out;
}

}  // namespace prompt
}  // namespace bag
