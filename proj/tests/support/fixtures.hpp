#pragma once

#include <string>
#include <vector>

#include "bag/llm.hpp"
#include "bag/sandbox.hpp"
#include "bag/search.hpp"

namespace fixtures {

inline bag::RunnerRegistry toy_runners() {
  bag::RunnerRegistry r;
  r.add("python", {TOY_CANDIDATE_PATH, "{source}", "{entry}"});
  return r;
}

inline std::string toy_code(const std::string& cls, const std::string& directive) {
  return "import numpy as np\n\nclass " + cls + ":\n    # toy: " + directive +
         "\n    def __init__(self, budget, dim, seed=None):\n        self.budget = budget\n";
}

inline bag::search::BenchEntry toy_bench_entry(const std::string& cls, const std::string& directive) {
  return {cls, "bench heuristic " + cls, {"python", toy_code(cls, directive), cls}};
}

/// Five bench heuristics of varying strength.
inline std::vector<bag::search::BenchEntry> toy_bench() {
  return {toy_bench_entry("BenchRandom", "mode=random"), toy_bench_entry("BenchFlipOne", "mode=ea rate=1.0"),
          toy_bench_entry("BenchFlipTwo", "mode=ea rate=2.0"), toy_bench_entry("BenchFlipHalf", "mode=ea rate=0.5"),
          toy_bench_entry("BenchScripted", "mode=scripted")};
}

inline std::string toy_response(int i, const std::string& directive) {
  return "Sure.\n# Description: variant " + std::to_string(i) + " (" + directive + ")\n# Code:\n```python\n" +
         toy_code("Gen" + std::to_string(i), directive) + "```\n";
}

/// Deterministic script of `n` responses cycling through algorithm modes.
/// Entries listed in `garbage` are replaced by unparsable text and those in
/// `crashing` by candidates that crash on start.
inline std::vector<bag::llm::SessionRecord> scripted_session(int n, std::vector<int> garbage = {},
                                                             std::vector<int> crashing = {}) {
  const char* modes[] = {"mode=ea rate=1.0", "mode=random",     "mode=ea rate=3.0",
                         "mode=ea rate=0.7", "mode=scripted",   "mode=ea rate=1.5"};
  std::vector<bag::llm::SessionRecord> out;
  for (int i = 1; i <= n; ++i) {
    std::string text;
    if (std::find(garbage.begin(), garbage.end(), i) != garbage.end())
      text = "I am sorry, I cannot help with that.";
    else if (std::find(crashing.begin(), crashing.end(), i) != crashing.end())
      text = toy_response(i, "mode=crash");
    else
      text = toy_response(i, modes[(i * 7) % 6]);
    out.push_back({"", text, bag::llm::Usage{100, 50}});
  }
  return out;
}

}  // namespace fixtures
