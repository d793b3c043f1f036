#pragma once

// Deterministic stand-in candidates for exercising the sandbox without a
// language runtime. A candidate's behavior is selected by a directive line
// inside its source text, e.g.
//
//   class FlipSearch:
//       # toy: mode=ea rate=1.5
//
// The same `run` routine backs both the child-process runner and the
// in-process oracle used by the protocol-transparency tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bag/rng.hpp"

namespace toy {

struct Directive {
  std::string mode = "random";
  std::map<std::string, std::string> args;

  double num(const std::string& key, double fallback) const {
    auto it = args.find(key);
    return it == args.end() ? fallback : std::stod(it->second);
  }
};

inline Directive parse_directive(std::string_view source) {
  Directive d;
  const auto pos = source.find("toy:");
  if (pos == std::string_view::npos) return d;
  auto end = source.find('\n', pos);
  std::istringstream is(std::string(source.substr(pos + 4, end == std::string_view::npos ? end : end - pos - 4)));
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "mode")
      d.mode = val;
    else
      d.args[key] = val;
  }
  return d;
}

struct Init {
  int dim = 1;
  std::int64_t budget = 1;
  std::uint64_t seed = 0;
  bool boolean = true;
  double lb = -5.0, ub = 5.0;
  double y_opt = 0.0;
  bool maximize = true;
};

struct Tell {
  double y = 0.0;
  std::int64_t evals = 0;
  bool target_hit = false;
};

/// Returns nullopt once the harness has stopped the run.
using AskFn = std::function<std::optional<Tell>(const std::vector<double>&)>;

inline bool better(double a, double b, bool maximize) { return maximize ? a > b : a < b; }

inline std::vector<double> random_point(const Init& init, std::mt19937_64& rng) {
  std::vector<double> x(static_cast<std::size_t>(init.dim));
  for (auto& v : x) v = init.boolean ? static_cast<double>(rng() >> 63) : bag::uniform(rng, init.lb, init.ub);
  return x;
}

inline void random_search(const Init& init, const AskFn& ask) {
  std::mt19937_64 rng(init.seed);
  for (std::int64_t i = 0; i < init.budget; ++i) {
    auto t = ask(random_point(init, rng));
    if (!t || t->target_hit) return;
  }
}

// (1+1) EA: bit-flip mutation with rate/dim per bit for Boolean domains,
// Gaussian steps of size `rate` (clipped to the box) for real ones.
inline void one_plus_one(const Init& init, double rate, const AskFn& ask) {
  std::mt19937_64 rng(init.seed);
  auto x = random_point(init, rng);
  auto t = ask(x);
  if (!t || t->target_hit) return;
  double fx = t->y;
  for (std::int64_t i = 1; i < init.budget; ++i) {
    auto y = x;
    if (init.boolean) {
      bool flipped = false;
      for (auto& v : y)
        if (bag::uniform01(rng) < rate / init.dim) {
          v = 1.0 - v;
          flipped = true;
        }
      if (!flipped) {
        auto k = bag::uniform_index(rng, static_cast<std::uint64_t>(init.dim));
        y[k] = 1.0 - y[k];
      }
    } else {
      for (auto& v : y) {
        // Box-Muller from the fixed uniform mapping keeps this reproducible.
        const double u1 = std::max(bag::uniform01(rng), 1e-300), u2 = bag::uniform01(rng);
        const double n = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        v = std::clamp(v + rate * n, init.lb, init.ub);
      }
    }
    t = ask(y);
    if (!t || t->target_hit) return;
    if (!better(fx, t->y, init.maximize)) {
      x = std::move(y);
      fx = t->y;
    }
  }
}

// Deterministic, RNG-free query sequence.
inline void scripted(const Init& init, const AskFn& ask) {
  for (std::int64_t k = 0; k < init.budget; ++k) {
    std::vector<double> x(static_cast<std::size_t>(init.dim));
    for (int i = 0; i < init.dim; ++i) {
      if (init.boolean)
        x[static_cast<std::size_t>(i)] = static_cast<double>(((k * 7 + i * 3) % 5) < 3);
      else
        x[static_cast<std::size_t>(i)] = init.lb + (init.ub - init.lb) * static_cast<double>((k + i) % 11) / 10.0;
    }
    auto t = ask(x);
    if (!t || t->target_hit) return;
  }
}

/// Runs the well-behaved modes. Returns false for modes that only make
/// sense as a child process (crash, sleep, ...).
inline bool run(const Directive& d, const Init& init, const AskFn& ask) {
  if (d.mode == "random") {
    random_search(init, ask);
  } else if (d.mode == "ea") {
    one_plus_one(init, d.num("rate", 1.0), ask);
  } else if (d.mode == "scripted") {
    scripted(init, ask);
  } else if (d.mode == "ones") {
    auto t = ask(std::vector<double>(static_cast<std::size_t>(init.dim), init.boolean ? 1.0 : 0.0));
    if (t && !t->target_hit && init.budget > 1) {
      Init rest = init;
      rest.budget = init.budget - 1;
      random_search(rest, ask);
    }
  } else if (d.mode == "exit_early") {
    const auto n = static_cast<std::int64_t>(d.num("asks", 1));
    Init short_init = init;
    short_init.budget = std::min(init.budget, n);
    random_search(short_init, ask);
  } else {
    return false;
  }
  return true;
}

}  // namespace toy
