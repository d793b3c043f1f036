#pragma once

// CodeBLEU for Python sources: n-gram match, keyword-weighted n-gram match,
// AST subtree match and data-flow match, combined linearly.
//
// Tokens come from a built-in lexer. Syntax trees come from an external
// `python3` process that dumps `ast.parse` output as JSON; subtree
// signatures and data-flow items are computed here from that dump. Without
// a usable tree the two structural components are dropped and the weights
// renormalized, with a warning on the score.

#include <array>
#include <cctype>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bag/error.hpp"
#include "bag/process.hpp"

namespace bag::analysis {

struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<bool> keyword_flags;

  std::size_t size() const { return tokens.size(); }
};

inline bool is_python_keyword(std::string_view s) {
  static const std::set<std::string, std::less<>> kw{
      "False", "None",   "True",    "and",      "as",       "assert", "async",  "await",
      "break", "class",  "continue", "def",     "del",      "elif",   "else",   "except",
      "finally", "for",  "from",    "global",   "if",       "import", "in",     "is",
      "lambda", "nonlocal", "not",  "or",       "pass",     "raise",  "return", "try",
      "while", "with",   "yield"};
  return kw.contains(s);
}

/// Lexes Python-like source. Comments and whitespace are skipped; string
/// literals are single tokens.
inline TokenSeq tokenize(std::string_view src) {
  static const std::array<std::string_view, 5> three{"**=", "//=", ">>=", "<<=", "..."};
  static const std::array<std::string_view, 19> two{"**", "//", "==", "!=", "<=", ">=", "<<", ">>", "+=", "-=",
                                                    "*=", "/=", "%=", "&=", "|=", "^=", "->", ":=", "@="};
  auto ident_start = [](unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; };
  auto ident_char = [](unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; };

  TokenSeq out;
  auto push = [&](std::string tok) {
    out.keyword_flags.push_back(is_python_keyword(tok));
    out.tokens.push_back(std::move(tok));
  };
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(src[i]);
    if (std::isspace(c) || c == '\\') {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    // String literal with an optional prefix such as r, b, f, rb.
    std::size_t p = i;
    while (p < n && p - i < 2 && std::string_view("rRbBuUfF").find(src[p]) != std::string_view::npos) ++p;
    if (p < n && (src[p] == '\'' || src[p] == '"') && (p == i || ident_start(c))) {
      const char q = src[p];
      const bool triple = p + 2 < n && src[p + 1] == q && src[p + 2] == q;
      std::size_t j = p + (triple ? 3 : 1);
      while (j < n) {
        if (src[j] == '\\') {
          j += 2;
          continue;
        }
        if (triple) {
          if (j + 2 < n && src[j] == q && src[j + 1] == q && src[j + 2] == q) {
            j += 3;
            break;
          }
        } else if (src[j] == q || src[j] == '\n') {
          ++j;
          break;
        }
        ++j;
      }
      j = std::min(j, n);
      push(std::string(src.substr(i, j - i)));
      i = j;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && ident_char(static_cast<unsigned char>(src[j]))) ++j;
      push(std::string(src.substr(i, j - i)));
      i = j;
      continue;
    }
    if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i + 1;
      while (j < n) {
        const auto d = static_cast<unsigned char>(src[j]);
        if ((d == '+' || d == '-') && (src[j - 1] == 'e' || src[j - 1] == 'E') &&
            !(src[i] == '0' && i + 1 < n && (src[i + 1] == 'x' || src[i + 1] == 'X'))) {
          ++j;
          continue;
        }
        if (!(std::isalnum(d) || d == '_' || d == '.')) break;
        ++j;
      }
      push(std::string(src.substr(i, j - i)));
      i = j;
      continue;
    }
    std::size_t len = 1;
    for (auto op : three)
      if (src.substr(i, 3) == op) len = 3;
    if (len == 1)
      for (auto op : two)
        if (src.substr(i, 2) == op) len = 2;
    push(std::string(src.substr(i, len)));
    i += len;
  }
  return out;
}

namespace detail {

using Gram = std::vector<std::string>;

struct GramStats {
  std::map<Gram, std::size_t> counts;
  std::map<Gram, double> weight;  // mean token weight of the n-gram
};

inline GramStats grams(const TokenSeq& s, std::size_t n, const std::vector<double>* token_weights) {
  GramStats g;
  if (n == 0 || s.size() < n) return g;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    Gram key(s.tokens.begin() + static_cast<std::ptrdiff_t>(i), s.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    auto [it, fresh] = g.counts.try_emplace(key, 0);
    ++it->second;
    if (fresh) {
      double w = 1.0;
      if (token_weights) {
        w = 0.0;
        for (std::size_t k = i; k < i + n; ++k) w += (*token_weights)[k];
        w /= static_cast<double>(n);
      }
      g.weight[key] = w;
    }
  }
  return g;
}

}  // namespace detail

/// Clipped n-gram precision of `candidate` against `reference`. With
/// weights (one per candidate token) each n-gram counts with the mean
/// weight of its tokens. Zero when the candidate has no n-grams.
inline double ngram_precision(const TokenSeq& candidate, const TokenSeq& reference, int n,
                              const std::vector<double>* weights = nullptr) {
  if (n < 1) fail(errc::invalid_argument, "n must be >= 1");
  if (weights && weights->size() != candidate.size())
    fail(errc::invalid_argument, "weights must match candidate length");
  const auto y = detail::grams(candidate, static_cast<std::size_t>(n), weights);
  const auto x = detail::grams(reference, static_cast<std::size_t>(n), nullptr);
  double num = 0.0, den = 0.0;
  for (const auto& [g, cnt] : y.counts) {
    const double w = y.weight.at(g);
    auto it = x.counts.find(g);
    const std::size_t clipped = it == x.counts.end() ? 0 : std::min(cnt, it->second);
    num += w * static_cast<double>(clipped);
    den += w * static_cast<double>(cnt);
  }
  return den > 0 ? num / den : 0.0;
}

inline double brevity_penalty(std::size_t candidate_len, std::size_t reference_len) {
  if (candidate_len >= reference_len) return 1.0;
  if (candidate_len == 0) return 0.0;
  return std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
}

/// BP times the geometric mean of p_1..p_N with uniform weights, where N is
/// max_n capped by both lengths. No smoothing: any zero precision gives 0.
inline double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n, double keyword_weight = 1.0,
                   bool weighted = false) {
  const auto order = static_cast<int>(
      std::min<std::size_t>({static_cast<std::size_t>(max_n), candidate.size(), reference.size()}));
  if (order < 1) return 0.0;
  std::vector<double> w;
  if (weighted)
    for (bool k : candidate.keyword_flags) w.push_back(k ? keyword_weight : 1.0);
  double log_sum = 0.0;
  for (int n = 1; n <= order; ++n) {
    const double p = ngram_precision(candidate, reference, n, weighted ? &w : nullptr);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p) / order;
  }
  return brevity_penalty(candidate.size(), reference.size()) * std::exp(log_sum);
}

// Syntax trees.

struct AstNode {
  std::string type;
  std::string id;   // Name.id / arg.arg
  std::string ctx;  // Load / Store / Del for Name
  std::vector<std::pair<std::string, std::vector<AstNode>>> fields;

  bool leaf() const {
    for (const auto& [name, kids] : fields)
      if (!kids.empty()) return false;
    return true;
  }
};

inline AstNode ast_from_json(const nlohmann::json& j) {
  AstNode n;
  n.type = j.at("t").get<std::string>();
  n.id = j.value("id", std::string{});
  n.ctx = j.value("ctx", std::string{});
  if (j.contains("f"))
    for (const auto& f : j["f"]) {
      std::vector<AstNode> kids;
      const auto& v = f.at(1);
      if (v.is_array())
        for (const auto& k : v) kids.push_back(ast_from_json(k));
      else
        kids.push_back(ast_from_json(v));
      n.fields.emplace_back(f.at(0).get<std::string>(), std::move(kids));
    }
  return n;
}

using Multiset = std::map<std::string, std::size_t>;

namespace detail {

inline std::string signature(const AstNode& n, Multiset& out) {
  if (n.leaf()) return n.type;
  std::string s = "(" + n.type;
  for (const auto& [name, kids] : n.fields)
    for (const auto& k : kids) s += " " + signature(k, out);
  s += ")";
  ++out[s];
  return s;
}

class Dataflow {
 public:
  void visit(const AstNode& n, std::vector<std::string>* loads) {
    if (n.type == "Name") {
      if (n.ctx == "Load") {
        if (defined_.contains(n.id)) items_.push_back({n.id, "comesFrom", {n.id}});
        if (loads) loads->push_back(n.id);
      } else if (n.ctx == "Store") {
        define(n.id, {});
      }
      return;
    }
    if (n.type == "arg") {
      defined_.insert(n.id);
      return;
    }
    if (n.type == "Assign" || n.type == "AnnAssign") {
      const auto src = expr(field(n, "value"));
      if (n.type == "Assign") {
        for (const auto& t : field(n, "targets")) bind(t, src);
      } else {
        for (const auto& t : field(n, "target")) bind(t, src);
      }
      return;
    }
    if (n.type == "AugAssign") {
      auto src = expr(field(n, "value"));
      for (const auto& t : field(n, "target")) {
        if (t.type == "Name") src.insert(src.begin(), t.id);
        bind(t, src);
      }
      return;
    }
    if (n.type == "For" || n.type == "AsyncFor" || n.type == "comprehension") {
      const auto src = expr(field(n, "iter"));
      for (const auto& t : field(n, "target")) bind(t, src);
      for (const auto& [name, kids] : n.fields)
        if (name != "iter" && name != "target")
          for (const auto& k : kids) visit(k, nullptr);
      return;
    }
    if (n.type == "withitem") {
      const auto src = expr(field(n, "context_expr"));
      for (const auto& t : field(n, "optional_vars")) bind(t, src);
      return;
    }
    if (n.type == "ListComp" || n.type == "SetComp" || n.type == "GeneratorExp" || n.type == "DictComp") {
      for (const auto& g : field(n, "generators")) visit(g, loads);
      for (const auto& [name, kids] : n.fields)
        if (name != "generators")
          for (const auto& k : kids) visit(k, loads);
      return;
    }
    for (const auto& [name, kids] : n.fields)
      for (const auto& k : kids) visit(k, loads);
  }

  /// Items with variables renamed var0, var1, ... by first appearance.
  std::vector<std::string> normalized() const {
    std::map<std::string, std::string> names;
    auto rename = [&](const std::string& v) {
      auto [it, fresh] = names.try_emplace(v, "");
      if (fresh) it->second = "var" + std::to_string(names.size() - 1);
      return it->second;
    };
    std::vector<std::string> out;
    for (const auto& it : items_) {
      std::string s = rename(it.var) + " " + it.rel + " [";
      for (std::size_t k = 0; k < it.from.size(); ++k) s += (k ? "," : "") + rename(it.from[k]);
      out.push_back(s + "]");
    }
    return out;
  }

 private:
  struct Item {
    std::string var;
    std::string rel;
    std::vector<std::string> from;
  };

  static const std::vector<AstNode>& field(const AstNode& n, std::string_view name) {
    static const std::vector<AstNode> none;
    for (const auto& [k, v] : n.fields)
      if (k == name) return v;
    return none;
  }

  std::vector<std::string> expr(const std::vector<AstNode>& nodes) {
    std::vector<std::string> loads;
    for (const auto& k : nodes) visit(k, &loads);
    return loads;
  }

  void define(const std::string& var, std::vector<std::string> from) {
    items_.push_back({var, "computedFrom", std::move(from)});
    defined_.insert(var);
  }

  void bind(const AstNode& target, const std::vector<std::string>& src) {
    if (target.type == "Name") {
      define(target.id, src);
    } else if (target.type == "Tuple" || target.type == "List" || target.type == "Starred") {
      for (const auto& [name, kids] : target.fields)
        for (const auto& k : kids) bind(k, src);
    } else {
      visit(target, nullptr);
    }
  }

  std::set<std::string> defined_;
  std::vector<Item> items_;
};

}  // namespace detail

struct ParseArtifacts {
  Multiset subtrees;
  Multiset dataflow;
};

inline ParseArtifacts artifacts_from_ast(const AstNode& root) {
  ParseArtifacts a;
  detail::signature(root, a.subtrees);
  detail::Dataflow df;
  df.visit(root, nullptr);
  for (auto& item : df.normalized()) ++a.dataflow[item];
  return a;
}

/// Produces syntax artifacts for a batch of sources; nullopt marks a
/// source that failed to parse. Throws FrontendUnavailable when the parser
/// cannot be run at all.
class Frontend {
 public:
  virtual ~Frontend() = default;
  virtual std::vector<std::optional<ParseArtifacts>> parse(const std::vector<std::string>& sources) = 0;
};

class PythonFrontend : public Frontend {
 public:
  explicit PythonFrontend(std::string interpreter = "python3", std::chrono::milliseconds timeout = std::chrono::seconds(60))
      : interpreter_(std::move(interpreter)), timeout_(timeout) {}

  std::vector<std::optional<ParseArtifacts>> parse(const std::vector<std::string>& sources) override {
    static constexpr const char* kScript = R"PY(
import ast, json, sys
sys.setrecursionlimit(20000)
def conv(n):
    d = {"t": type(n).__name__}
    if isinstance(n, ast.Name):
        d["id"] = n.id
        d["ctx"] = type(n.ctx).__name__
    elif isinstance(n, ast.arg):
        d["id"] = n.arg
    fields = []
    for name, v in ast.iter_fields(n):
        if isinstance(v, ast.expr_context):
            continue
        if isinstance(v, ast.AST):
            fields.append([name, conv(v)])
        elif isinstance(v, list):
            kids = [conv(x) for x in v if isinstance(x, ast.AST)]
            if kids:
                fields.append([name, kids])
    if fields:
        d["f"] = fields
    return d
out = []
for src in json.load(sys.stdin):
    try:
        out.append({"ok": True, "ast": conv(ast.parse(src))})
    except (SyntaxError, ValueError, RecursionError) as e:
        out.append({"ok": False, "error": str(e)})
json.dump(out, sys.stdout)
)PY";
    std::optional<CapturedOutput> res;
    try {
      res = run_capture({interpreter_, "-c", kScript}, nlohmann::json(sources).dump(), timeout_);
    } catch (const error& e) {
      fail(errc::frontend_unavailable, std::string("cannot start ") + interpreter_ + ": " + e.what());
    }
    if (!res) fail(errc::frontend_unavailable, "python frontend timed out");
    if (!res->exit.exited || res->exit.code != 0)
      fail(errc::frontend_unavailable, "python frontend failed: " + res->err);
    const auto j = nlohmann::json::parse(res->out, nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.size() != sources.size())
      fail(errc::frontend_unavailable, "python frontend returned malformed output");
    std::vector<std::optional<ParseArtifacts>> out;
    for (const auto& item : j)
      out.push_back(item.value("ok", false) ? std::optional(artifacts_from_ast(ast_from_json(item["ast"])))
                                            : std::nullopt);
    return out;
  }

 private:
  std::string interpreter_;
  std::chrono::milliseconds timeout_;
};

struct CodeBleuOptions {
  std::array<double, 4> lambdas{0.25, 0.25, 0.25, 0.25};
  int max_n = 4;
  double keyword_weight = 5.0;

  void validate() const {
    double s = 0.0;
    for (double l : lambdas) {
      if (l < 0) fail(errc::invalid_argument, "lambdas must be >= 0");
      s += l;
    }
    if (std::abs(s - 1.0) > 1e-9) fail(errc::invalid_argument, "lambdas must sum to 1");
    if (max_n < 1) fail(errc::invalid_argument, "max_n must be >= 1");
  }
};

struct CodeBleuScore {
  double total = 0.0;
  double b = 0.0;
  double bw = 0.0;
  std::optional<double> ast;  // nullopt when dropped
  std::optional<double> df;
  std::array<double, 4> lambdas{};  // effective weights after renormalization
  std::vector<std::string> warnings;
};

/// A source prepared once for repeated comparisons.
struct Prepared {
  TokenSeq tokens;
  std::optional<ParseArtifacts> artifacts;
  std::string parse_note;  // why artifacts are missing
};

inline double multiset_overlap(const Multiset& candidate, const Multiset& reference) {
  std::size_t num = 0, den = 0;
  for (const auto& [k, c] : reference) {
    den += c;
    auto it = candidate.find(k);
    if (it != candidate.end()) num += std::min(c, it->second);
  }
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

inline CodeBleuScore codebleu(const Prepared& candidate, const Prepared& reference, const CodeBleuOptions& opts = {}) {
  opts.validate();
  CodeBleuScore s;
  s.b = bleu(candidate.tokens, reference.tokens, opts.max_n);
  s.bw = bleu(candidate.tokens, reference.tokens, opts.max_n, opts.keyword_weight, true);

  std::array<bool, 4> active{true, true, false, false};
  if (!candidate.artifacts || !reference.artifacts) {
    const auto& note = !reference.artifacts ? reference.parse_note : candidate.parse_note;
    s.warnings.push_back("syntax components dropped: " + note);
  } else {
    if (reference.artifacts->subtrees.empty()) {
      s.warnings.push_back("reference has no subtrees; AST component dropped");
    } else {
      s.ast = multiset_overlap(candidate.artifacts->subtrees, reference.artifacts->subtrees);
      active[2] = true;
    }
    if (reference.artifacts->dataflow.empty()) {
      s.warnings.push_back("reference has no data flow; data-flow component dropped");
    } else {
      s.df = multiset_overlap(candidate.artifacts->dataflow, reference.artifacts->dataflow);
      active[3] = true;
    }
  }
  double mass = 0.0;
  for (int k = 0; k < 4; ++k)
    if (active[static_cast<std::size_t>(k)]) mass += opts.lambdas[static_cast<std::size_t>(k)];
  const std::array<double, 4> comp{s.b, s.bw, s.ast.value_or(0.0), s.df.value_or(0.0)};
  for (std::size_t k = 0; k < 4; ++k) {
    s.lambdas[k] = active[k] && mass > 0 ? opts.lambdas[k] / mass : 0.0;
    s.total += s.lambdas[k] * comp[k];
  }
  if (mass <= 0) s.warnings.push_back("no weighted component is available");
  return s;
}

/// Prepares sources in one frontend batch. A missing frontend leaves every
/// source without artifacts.
inline std::vector<Prepared> prepare(const std::vector<std::string>& sources, Frontend* frontend) {
  std::vector<Prepared> out(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) out[i].tokens = tokenize(sources[i]);
  if (!frontend) {
    for (auto& p : out) p.parse_note = "no frontend";
    return out;
  }
  try {
    auto arts = frontend->parse(sources);
    for (std::size_t i = 0; i < sources.size(); ++i) {
      out[i].artifacts = std::move(arts[i]);
      if (!out[i].artifacts) out[i].parse_note = "source " + std::to_string(i) + " does not parse";
    }
  } catch (const error& e) {
    if (e.code() != errc::frontend_unavailable) throw;
    for (auto& p : out) p.parse_note = std::string("FrontendUnavailable: ") + e.what();
  }
  return out;
}

inline CodeBleuScore codebleu(const std::string& candidate, const std::string& reference,
                              const CodeBleuOptions& opts = {}, Frontend* frontend = nullptr) {
  const auto p = prepare({candidate, reference}, frontend);
  return codebleu(p[0], p[1], opts);
}

/// Upper-triangular lineage similarity: cell (i, j), j > i, compares code j
/// (candidate) against code i (reference).
struct SimilarityMatrix {
  std::size_t n = 0;
  std::map<std::pair<std::size_t, std::size_t>, CodeBleuScore> cells;

  std::optional<double> at(std::size_t i, std::size_t j) const {
    auto it = cells.find({i, j});
    if (it == cells.end()) return std::nullopt;
    return it->second.total;
  }

  /// CSV with index headers; absent cells are empty.
  std::string to_csv() const {
    std::string s = "";
    for (std::size_t j = 0; j < n; ++j) s += "," + std::to_string(j);
    s += "\n";
    for (std::size_t i = 0; i < n; ++i) {
      s += std::to_string(i);
      for (std::size_t j = 0; j < n; ++j) {
        s += ",";
        if (auto v = at(i, j)) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6f", *v);
          s += buf;
        }
      }
      s += "\n";
    }
    return s;
  }
};

inline SimilarityMatrix similarity_matrix(const std::vector<std::string>& codes, const CodeBleuOptions& opts = {},
                                          Frontend* frontend = nullptr) {
  if (codes.size() < 2) fail(errc::invalid_argument, "similarity matrix needs at least two codes");
  const auto prepared = prepare(codes, frontend);
  SimilarityMatrix m;
  m.n = codes.size();
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t j = i + 1; j < codes.size(); ++j) m.cells[{i, j}] = codebleu(prepared[j], prepared[i], opts);
  return m;
}

}  // namespace bag::analysis
