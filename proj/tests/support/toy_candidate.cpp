// Child-process runner for toy candidates: toy_candidate <source_file> <entry>
//
// Exit codes: 0 normal completion or stop, 2 entry class missing, 3 crash
// requested by the directive.

#include <unistd.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "toy_algorithms.hpp"

namespace {

std::optional<toy::Tell> ask_harness(const std::vector<double>& x) {
  std::cout << nlohmann::json{{"type", "ask"}, {"x", x}}.dump() << '\n' << std::flush;
  std::string line;
  if (!std::getline(std::cin, line)) return std::nullopt;
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || j.value("type", "") != "tell") return std::nullopt;
  return toy::Tell{j.at("y").get<double>(), j.at("evals").get<std::int64_t>(), j.at("target_hit").get<bool>()};
}

[[noreturn]] void sleep_forever() {
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: toy_candidate <source_file> <entry>\n";
    return 64;
  }
  std::ifstream in(argv[1]);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string source = buf.str();
  if (source.find("class " + std::string(argv[2])) == std::string::npos) {
    std::cerr << "entry class '" << argv[2] << "' not found\n";
    return 2;
  }
  const auto directive = toy::parse_directive(source);

  std::string line;
  if (!std::getline(std::cin, line)) return 0;
  const auto j = nlohmann::json::parse(line);
  toy::Init init;
  init.dim = j.at("dim").get<int>();
  init.budget = j.at("budget").get<std::int64_t>();
  init.seed = j.at("seed").get<std::uint64_t>();
  init.boolean = j.at("domain").get<std::string>() == "bool";
  init.lb = j.at("lb").get<double>();
  init.ub = j.at("ub").get<double>();
  init.y_opt = j.at("y_opt").get<double>();
  init.maximize = j.at("orientation").get<std::string>() == "max";

  const auto& mode = directive.mode;
  if (toy::run(directive, init, ask_harness)) return 0;

  if (mode == "crash") {
    std::cerr << "Traceback: boom\n";
    return 3;
  }
  if (mode == "crash_after") {
    const auto n = static_cast<std::int64_t>(directive.num("asks", 1));
    std::mt19937_64 rng(init.seed);
    for (std::int64_t i = 0; i < n; ++i)
      if (!ask_harness(toy::random_point(init, rng))) return 0;
    std::cerr << "ValueError: late failure\n";
    return 3;
  }
  if (mode == "sleep") sleep_forever();
  if (mode == "spin") {
    volatile std::uint64_t x = 0;
    for (;;) x = x + 1;
  }
  if (mode == "fork_sleep") {
    if (::fork() == 0) sleep_forever();
    sleep_forever();
  }
  if (mode == "overbudget") {
    // Ignores stop messages and keeps asking.
    std::mt19937_64 rng(init.seed);
    const auto extra = static_cast<std::int64_t>(directive.num("extra", 10));
    for (std::int64_t i = 0; i < init.budget + extra; ++i) {
      std::cout << nlohmann::json{{"type", "ask"}, {"x", toy::random_point(init, rng)}}.dump() << '\n' << std::flush;
      if (!std::cout) return 0;
      std::getline(std::cin, line);
    }
    return 0;
  }
  if (mode == "garbage") {
    std::cout << "this is not json\n" << std::flush;
    sleep_forever();
  }
  if (mode == "wronglen") {
    std::vector<double> x(static_cast<std::size_t>(init.dim + 1), 0.0);
    ask_harness(x);
    return 0;
  }
  if (mode == "outofrange") {
    std::vector<double> x(static_cast<std::size_t>(init.dim), init.boolean ? 2.0 : 99.0);
    ask_harness(x);
    return 0;
  }
  std::cerr << "unknown toy mode '" << mode << "'\n";
  return 3;
}
