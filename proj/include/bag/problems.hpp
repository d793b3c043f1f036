#pragma once

// Benchmark problem registry: pseudo-Boolean (maximization) and continuous
// (minimization) functions with seeded per-instance transformations and
// their ECDF target sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bag/error.hpp"
#include "bag/rng.hpp"

namespace bag {

enum class Suite { pbo, bbob };
enum class Orientation { maximize, minimize };
enum class DomainKind { boolean, real };

inline constexpr double kRealLower = -5.0;
inline constexpr double kRealUpper = 5.0;
inline constexpr int kMaxInstance = 10;

inline std::string to_string(Suite s) { return s == Suite::pbo ? "pbo" : "bbob"; }

inline Suite parse_suite(std::string_view s) {
  if (s == "pbo") return Suite::pbo;
  if (s == "bbob") return Suite::bbob;
  fail(errc::invalid_argument, "unknown suite '" + std::string(s) + "'");
}

inline std::string to_string(Orientation o) { return o == Orientation::maximize ? "max" : "min"; }

/// True when `a` is at least as good as `b` under the orientation.
constexpr bool at_least_as_good(double a, double b, Orientation o) noexcept {
  return o == Orientation::maximize ? a >= b : a <= b;
}

constexpr bool strictly_better(double a, double b, Orientation o) noexcept {
  return o == Orientation::maximize ? a > b : a < b;
}

struct ProblemId {
  Suite suite = Suite::pbo;
  int function = 1;
  int instance = 1;
  int dim = 1;

  friend bool operator==(const ProblemId&, const ProblemId&) = default;
  friend auto operator<=>(const ProblemId&, const ProblemId&) = default;

  /// Instances 1-5 are used during search, 6-10 are held out.
  bool is_training() const noexcept { return instance <= 5; }
};

inline std::string to_string(const ProblemId& id) {
  return to_string(id.suite) + "/F" + std::to_string(id.function) + "/i" +
         std::to_string(id.instance) + "/d" + std::to_string(id.dim);
}

inline void to_json(nlohmann::json& j, const ProblemId& id) {
  j = {{"suite", to_string(id.suite)},
       {"function", id.function},
       {"instance", id.instance},
       {"dim", id.dim}};
}

inline void from_json(const nlohmann::json& j, ProblemId& id) {
  id.suite = parse_suite(j.at("suite").get<std::string>());
  id.function = j.at("function").get<int>();
  id.instance = j.at("instance").get<int>();
  id.dim = j.at("dim").get<int>();
}

/// Seeded parameters of one instance. Only the fields relevant to the
/// suite are populated: `mask` for pbo, `x_opt`/`f_opt`/`signs` for bbob.
struct Transform {
  std::vector<std::uint8_t> mask;
  std::vector<double> x_opt;
  std::vector<double> signs;
  double f_opt = 0.0;
};

struct TargetSet {
  /// Ordered from easiest to hardest; strictly monotone in the improving
  /// direction of `orientation`.
  std::vector<double> values;
  Orientation orientation = Orientation::maximize;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
};

class ProblemInstance;

struct FunctionSpec {
  Suite suite = Suite::pbo;
  int index = 0;
  std::string name;
  /// Human-readable supported-dimension rule, exported in the catalog.
  std::string dims_rule = "any dim >= 1";
  std::function<bool(int dim)> supports_dim = [](int dim) { return dim >= 1; };
  /// Objective on the already-transformed input (pbo) or raw input (bbob).
  std::function<double(std::span<const double> x, const Transform& tr)> objective;
  /// pbo: optimum value as a function of dim. Unused for bbob.
  std::function<double(int dim)> optimum_value;
  /// pbo: a point in untransformed space attaining the optimum.
  std::function<std::vector<double>(int dim)> optimum_point;
  /// bbob: seeds the instance parameters (x_opt, f_opt, signs).
  std::function<Transform(int dim, int instance, std::mt19937_64& rng)> make_transform;
  /// pbo: target values for a dim (easiest first). bbob uses the shared
  /// precision ladder.
  std::function<std::vector<double>(int dim)> targets;
  std::string targets_rule;
};

/// Holds the function table. The default registry is populated with the
/// required functions; callers may add extensions through `add`.
class Registry {
 public:
  void add(FunctionSpec spec) {
    std::lock_guard lock(mu_);
    const auto key = std::make_pair(spec.suite, spec.index);
    specs_[key] = std::make_shared<const FunctionSpec>(std::move(spec));
  }

  std::shared_ptr<const FunctionSpec> find(Suite suite, int index) const {
    std::lock_guard lock(mu_);
    auto it = specs_.find({suite, index});
    return it == specs_.end() ? nullptr : it->second;
  }

  const FunctionSpec& at(Suite suite, int index) const {
    auto spec = find(suite, index);
    if (!spec)
      fail(errc::unknown_function, to_string(suite) + " F" + std::to_string(index) + " is not registered");
    return *spec;
  }

  std::vector<std::shared_ptr<const FunctionSpec>> all() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<const FunctionSpec>> out;
    for (const auto& [key, spec] : specs_) out.push_back(spec);
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::pair<Suite, int>, std::shared_ptr<const FunctionSpec>> specs_;
};

namespace detail {

// Continuous-suite building blocks.

inline double osz(double x) {
  if (x == 0.0) return 0.0;
  const double xh = std::log(std::abs(x));
  const double c1 = x > 0 ? 10.0 : 5.5;
  const double c2 = x > 0 ? 7.9 : 3.1;
  return std::copysign(std::exp(xh + 0.049 * (std::sin(c1 * xh) + std::sin(c2 * xh))), x);
}

inline double ramp(std::size_t i, std::size_t d) {
  return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
}

inline double asy(double x, double beta, std::size_t i, std::size_t d) {
  return x > 0 ? std::pow(x, 1.0 + beta * ramp(i, d) * std::sqrt(x)) : x;
}

inline double conditioning(double alpha, std::size_t i, std::size_t d) {
  return std::pow(alpha, 0.5 * ramp(i, d));
}

inline double sphere(std::span<const double> x, const Transform& tr) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = x[i] - tr.x_opt[i];
    s += z * z;
  }
  return s + tr.f_opt;
}

inline double rastrigin(std::span<const double> x, const Transform& tr) {
  const std::size_t d = x.size();
  double cos_sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double z = conditioning(10.0, i, d) * asy(osz(x[i] - tr.x_opt[i]), 0.2, i, d);
    cos_sum += std::cos(2.0 * std::numbers::pi * z);
    sq += z * z;
  }
  return 10.0 * (static_cast<double>(d) - cos_sum) + sq + tr.f_opt;
}

inline double rosenbrock(std::span<const double> x, const Transform& tr) {
  const std::size_t d = x.size();
  const double scale = std::max(1.0, std::sqrt(static_cast<double>(d)) / 8.0);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = scale * (x[i] - tr.x_opt[i]) + 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double a = z[i] * z[i] - z[i + 1];
    const double b = z[i] - 1.0;
    s += 100.0 * a * a + b * b;
  }
  return s + tr.f_opt;
}

inline double different_powers(std::span<const double> x, const Transform& tr) {
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    s += std::pow(std::abs(x[i] - tr.x_opt[i]), 2.0 + 4.0 * ramp(i, d));
  return std::sqrt(s) + tr.f_opt;
}

inline constexpr double kSchwefelOpt = 4.2096874633;

inline double schwefel(std::span<const double> x, const Transform& tr) {
  const std::size_t d = x.size();
  std::vector<double> xh(d), zh(d), z(d);
  for (std::size_t i = 0; i < d; ++i) xh[i] = 2.0 * tr.signs[i] * x[i];
  zh[0] = xh[0];
  for (std::size_t i = 1; i < d; ++i) zh[i] = xh[i] + 0.25 * (xh[i - 1] - 2.0 * std::abs(tr.x_opt[i - 1]));
  double s = 0.0, pen = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double two_abs = 2.0 * std::abs(tr.x_opt[i]);
    z[i] = 100.0 * (conditioning(10.0, i, d) * (zh[i] - two_abs) + two_abs);
    s += z[i] * std::sin(std::sqrt(std::abs(z[i])));
    const double excess = std::abs(z[i] / 100.0) - 5.0;
    if (excess > 0) pen += excess * excess;
  }
  return -s / (100.0 * static_cast<double>(d)) + 4.189828872724339 + 100.0 * pen + tr.f_opt;
}

inline Transform shifted_transform(int dim, int instance, std::mt19937_64& rng) {
  Transform tr;
  tr.x_opt.assign(static_cast<std::size_t>(dim), 0.0);
  tr.signs.assign(static_cast<std::size_t>(dim), 1.0);
  if (instance > 1) {
    for (auto& v : tr.x_opt) v = uniform(rng, -4.0, 4.0);
    tr.f_opt = uniform(rng, -100.0, 100.0);
  }
  return tr;
}

inline Transform schwefel_transform(int dim, int instance, std::mt19937_64& rng) {
  Transform tr;
  tr.signs.assign(static_cast<std::size_t>(dim), 1.0);
  if (instance > 1) {
    for (auto& s : tr.signs) s = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    tr.f_opt = uniform(rng, -100.0, 100.0);
  }
  tr.x_opt.resize(tr.signs.size());
  for (std::size_t i = 0; i < tr.signs.size(); ++i) tr.x_opt[i] = tr.signs[i] * kSchwefelOpt / 2.0;
  return tr;
}

inline std::vector<double> integer_range(long lo, long hi, long step = 1) {
  std::vector<double> out;
  for (long v = lo; v <= hi; v += step) out.push_back(static_cast<double>(v));
  return out;
}

inline FunctionSpec pbo_spec(int index, std::string name,
                             std::function<double(std::span<const double>)> f,
                             std::function<double(int)> opt,
                             std::function<std::vector<double>(int)> targets, std::string rule) {
  FunctionSpec s;
  s.suite = Suite::pbo;
  s.index = index;
  s.name = std::move(name);
  s.objective = [f = std::move(f)](std::span<const double> x, const Transform&) { return f(x); };
  s.optimum_value = std::move(opt);
  s.optimum_point = [](int dim) { return std::vector<double>(static_cast<std::size_t>(dim), 1.0); };
  s.targets = std::move(targets);
  s.targets_rule = std::move(rule);
  return s;
}

inline FunctionSpec bbob_spec(int index, std::string name,
                              double (*f)(std::span<const double>, const Transform&),
                              Transform (*mk)(int, int, std::mt19937_64&) = shifted_transform) {
  FunctionSpec s;
  s.suite = Suite::bbob;
  s.index = index;
  s.name = std::move(name);
  s.dims_rule = "any dim >= 2";
  s.supports_dim = [](int dim) { return dim >= 2; };
  s.objective = f;
  s.make_transform = mk;
  s.targets_rule = "101 log-spaced precisions f_opt + 10^k, k from 2 down to -8";
  return s;
}

inline void register_defaults(Registry& reg) {
  reg.add(pbo_spec(
      1, "OneMax",
      [](std::span<const double> x) {
        double s = 0;
        for (double v : x) s += v;
        return s;
      },
      [](int n) { return static_cast<double>(n); },
      [](int n) { return integer_range(n / 2, n); }, "{floor(n/2), ..., n}"));
  reg.add(pbo_spec(
      2, "LeadingOnes",
      [](std::span<const double> x) {
        double s = 0;
        for (double v : x) {
          if (v != 1.0) break;
          s += 1.0;
        }
        return s;
      },
      [](int n) { return static_cast<double>(n); },
      [](int n) { return integer_range(0, n); }, "{0, ..., n}"));
  reg.add(pbo_spec(
      3, "Harmonic",
      [](std::span<const double> x) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(i + 1) * x[i];
        return s;
      },
      [](int n) { return static_cast<double>(n) * (n + 1) / 2.0; },
      [](int n) {
        // Step 5 down from the optimum to half of it: {2525 + 5i} at n = 100.
        const long top = static_cast<long>(n) * (n + 1) / 2;
        const long floor_half = (top + 1) / 2;
        const long k = (top - floor_half) / 5;
        return integer_range(top - 5 * k, top, 5);
      },
      "{opt - 5k, ..., opt - 5, opt} down to opt/2, opt = n(n+1)/2"));

  reg.add(bbob_spec(1, "Sphere", sphere));
  reg.add(bbob_spec(3, "Rastrigin", rastrigin));
  reg.add(bbob_spec(8, "Rosenbrock", rosenbrock));
  reg.add(bbob_spec(14, "DifferentPowers", different_powers));
  reg.add(bbob_spec(20, "Schwefel", schwefel, schwefel_transform));
}

}  // namespace detail

inline Registry& registry() {
  static Registry reg;
  static std::once_flag once;
  std::call_once(once, [] { detail::register_defaults(reg); });
  return reg;
}

/// One seeded benchmark instance. Immutable after construction; `evaluate`
/// is a pure function of the stored transform and the input.
class ProblemInstance {
 public:
  ProblemInstance(ProblemId id, std::shared_ptr<const FunctionSpec> spec, Transform tr)
      : id_(id), spec_(std::move(spec)), transform_(std::move(tr)) {
    if (id_.suite == Suite::pbo) {
      y_opt_ = spec_->optimum_value(id_.dim);
    } else {
      y_opt_ = evaluate(transform_.x_opt);
    }
  }

  const ProblemId& id() const noexcept { return id_; }
  const std::string& name() const noexcept { return spec_->name; }
  const Transform& transform() const noexcept { return transform_; }
  double y_opt() const noexcept { return y_opt_; }
  double f_opt() const noexcept { return id_.suite == Suite::bbob ? transform_.f_opt : y_opt_; }
  int dim() const noexcept { return id_.dim; }

  DomainKind domain() const noexcept {
    return id_.suite == Suite::pbo ? DomainKind::boolean : DomainKind::real;
  }
  Orientation orientation() const noexcept {
    return id_.suite == Suite::pbo ? Orientation::maximize : Orientation::minimize;
  }
  double lower_bound() const noexcept { return domain() == DomainKind::boolean ? 0.0 : kRealLower; }
  double upper_bound() const noexcept { return domain() == DomainKind::boolean ? 1.0 : kRealUpper; }

  /// A point attaining y_opt.
  std::vector<double> optimum() const {
    if (id_.suite == Suite::bbob) return transform_.x_opt;
    auto x = spec_->optimum_point(id_.dim);
    if (!transform_.mask.empty())
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = transform_.mask[i] ? 1.0 - x[i] : x[i];
    return x;
  }

  void validate(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(id_.dim))
      fail(errc::domain_violation,
           "expected " + std::to_string(id_.dim) + " entries, got " + std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      const bool ok = domain() == DomainKind::boolean
                          ? (v == 0.0 || v == 1.0)
                          : (std::isfinite(v) && v >= kRealLower && v <= kRealUpper);
      if (!ok) fail(errc::domain_violation, "entry " + std::to_string(i) + " out of domain");
    }
  }

  double evaluate(std::span<const double> x) const {
    validate(x);
    if (id_.suite == Suite::pbo && !transform_.mask.empty()) {
      std::vector<double> z(x.begin(), x.end());
      for (std::size_t i = 0; i < z.size(); ++i)
        if (transform_.mask[i]) z[i] = 1.0 - z[i];
      return spec_->objective(z, transform_);
    }
    return spec_->objective(x, transform_);
  }

  const FunctionSpec& spec() const noexcept { return *spec_; }

 private:
  ProblemId id_;
  std::shared_ptr<const FunctionSpec> spec_;
  Transform transform_;
  double y_opt_ = 0.0;
};

inline ProblemInstance make_instance(const ProblemId& id, const Registry& reg = registry()) {
  auto spec = reg.find(id.suite, id.function);
  if (!spec)
    fail(errc::unknown_function,
         to_string(id.suite) + " F" + std::to_string(id.function) + " is not registered");
  if (id.instance < 1 || id.instance > kMaxInstance)
    fail(errc::invalid_argument, "instance must be in [1, 10], got " + std::to_string(id.instance));
  if (!spec->supports_dim(id.dim))
    fail(errc::unsupported_dim, spec->name + " does not support dim " + std::to_string(id.dim) +
                                    " (" + spec->dims_rule + ")");

  std::mt19937_64 rng(derive_seed({static_cast<std::uint64_t>(id.suite),
                                   static_cast<std::uint64_t>(id.function),
                                   static_cast<std::uint64_t>(id.instance),
                                   static_cast<std::uint64_t>(id.dim)}));
  Transform tr;
  if (id.suite == Suite::pbo) {
    if (id.instance > 1) {
      tr.mask.resize(static_cast<std::size_t>(id.dim));
      for (auto& b : tr.mask) b = static_cast<std::uint8_t>(rng() >> 63);
    }
  } else {
    tr = spec->make_transform(id.dim, id.instance, rng);
  }
  return ProblemInstance(id, std::move(spec), std::move(tr));
}

inline constexpr int kPrecisionTargets = 101;

inline TargetSet target_set(const ProblemInstance& inst) {
  TargetSet ts;
  ts.orientation = inst.orientation();
  if (inst.id().suite == Suite::pbo) {
    ts.values = inst.spec().targets(inst.dim());
  } else {
    ts.values.reserve(kPrecisionTargets);
    for (int k = 0; k < kPrecisionTargets; ++k)
      ts.values.push_back(inst.f_opt() + std::pow(10.0, 2.0 - 0.1 * k));
  }
  if (ts.values.empty()) fail(errc::empty_targets, to_string(inst.id()));
  return ts;
}

inline TargetSet target_set(const ProblemId& id, const Registry& reg = registry()) {
  return target_set(make_instance(id, reg));
}

/// Problem catalog for `bench list`.
inline nlohmann::json catalog(const Registry& reg = registry()) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& spec : reg.all()) {
    out.push_back({{"suite", to_string(spec->suite)},
                   {"function", spec->index},
                   {"name", spec->name},
                   {"supported_dims", spec->dims_rule},
                   {"orientation", spec->suite == Suite::pbo ? "maximize" : "minimize"},
                   {"targets", spec->targets_rule}});
  }
  return out;
}

}  // namespace bag
