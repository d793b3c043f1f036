#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bag/analysis.hpp"

using namespace bag;
using namespace bag::analysis;

namespace {

TokenSeq seq(const std::vector<std::string>& toks) {
  TokenSeq s;
  for (const auto& t : toks) {
    s.tokens.push_back(t);
    s.keyword_flags.push_back(is_python_keyword(t));
  }
  return s;
}

// Counts n-grams by scanning every window against every other window.
double brute_precision(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t n) {
  if (cand.size() < n) return 0.0;
  auto window = [](const std::vector<std::string>& s, std::size_t at, std::size_t n) {
    return std::vector<std::string>(s.begin() + static_cast<long>(at), s.begin() + static_cast<long>(at + n));
  };
  std::vector<std::vector<std::string>> seen;
  std::size_t matched = 0, total = 0;
  for (std::size_t i = 0; i + n <= cand.size(); ++i) {
    const auto g = window(cand, i, n);
    if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
    seen.push_back(g);
    std::size_t in_cand = 0, in_ref = 0;
    for (std::size_t k = 0; k + n <= cand.size(); ++k) in_cand += window(cand, k, n) == g;
    for (std::size_t k = 0; k + n <= ref.size(); ++k) in_ref += window(ref, k, n) == g;
    matched += std::min(in_cand, in_ref);
    total += in_cand;
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

const char* kLineage[] = {
    R"(import numpy as np

class Search:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        best = None
        for i in range(self.budget):
            x = np.random.randint(0, 2, self.dim)
            y = func(x)
            if best is None or y > best:
                best = y
        return best
)",
    R"(import numpy as np

class Search:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        best = None
        x = np.random.randint(0, 2, self.dim)
        for i in range(self.budget):
            z = x.copy()
            y = func(z)
            if best is None or y > best:
                best = y
                x = z
        return best
)",
    R"(import numpy as np

class Search:
    def __init__(self, budget, dim, rate=1.0):
        self.budget = budget
        self.dim = dim
        self.rate = rate

    def __call__(self, func):
        best = None
        x = np.random.randint(0, 2, self.dim)
        for i in range(self.budget):
            z = x.copy()
            flips = np.random.rand(self.dim) < self.rate / self.dim
            z[flips] = 1 - z[flips]
            y = func(z)
            if best is None or y >= best:
                best = y
                x = z
        return best
)",
    R"(class Other:
    def run(self, f, n):
        total = 0
        while n > 0:
            total += f(n)
            n -= 1
        return total
)"};

}  // namespace

TEST(Tokenize, SplitsPythonSource) {
  const auto t = tokenize("def f(x, y=2.5e-3):\n    return x ** y  # note\ns = 'a b' + r\"c\"\n");
  const std::vector<std::string> want{"def", "f", "(", "x", ",", "y", "=", "2.5e-3", ")", ":", "return",
                                      "x",   "**", "y", "s", "=", "'a b'", "+", "r\"c\""};
  EXPECT_EQ(t.tokens, want);
  EXPECT_TRUE(t.keyword_flags[0]);
  EXPECT_TRUE(t.keyword_flags[10]);
  EXPECT_FALSE(t.keyword_flags[1]);
  EXPECT_EQ(tokenize("a //= b\nc >>= 1").tokens, (std::vector<std::string>{"a", "//=", "b", "c", ">>=", "1"}));
}

TEST(NgramPrecision, HandFixture) {
  EXPECT_DOUBLE_EQ(ngram_precision(seq({"a", "b", "a"}), seq({"a", "b"}), 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(ngram_precision(seq({"a", "b", "a"}), seq({"a", "b"}), 2), 0.5);
  EXPECT_EQ(ngram_precision(seq({"a"}), seq({"a", "b"}), 2), 0.0);
  EXPECT_THROW(ngram_precision(seq({"a"}), seq({"a"}), 0), error);
}

TEST(NgramPrecision, MatchesBruteForceCounting) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "if", "for"};
  for (int c = 0; c < 500; ++c) {
    auto draw = [&](std::size_t len) {
      std::vector<std::string> s;
      for (std::size_t k = 0; k < len; ++k) s.push_back(vocab[rng() % (c % 2 ? 3 : vocab.size())]);
      return s;
    };
    const auto cand = draw(1 + rng() % 12), ref = draw(1 + rng() % 12);
    for (std::size_t n = 1; n <= 4; ++n)
      EXPECT_EQ(ngram_precision(seq(cand), seq(ref), static_cast<int>(n)), brute_precision(cand, ref, n)) << c;
  }
}

TEST(NgramPrecision, KeywordWeightsAverageOverTheGram) {
  // Candidate "if x": weights {5, 1}. Only "if" matches at n = 1.
  const std::vector<double> w{5.0, 1.0};
  EXPECT_DOUBLE_EQ(ngram_precision(seq({"if", "x"}), seq({"if", "y"}), 1, &w), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(ngram_precision(seq({"if", "x"}), seq({"if", "x"}), 2, &w), 1.0);
}

TEST(Bleu, BrevityPenaltyFixture) {
  EXPECT_NEAR(bleu(seq({"a", "b"}), seq({"a", "b", "c", "d"}), 4), std::exp(-1.0), 1e-9);
  EXPECT_EQ(brevity_penalty(5, 3), 1.0);
  EXPECT_EQ(brevity_penalty(0, 3), 0.0);
}

TEST(Bleu, NoSmoothing) {
  EXPECT_EQ(bleu(seq({"a", "b", "c"}), seq({"c", "b", "a"}), 4), 0.0);
}

TEST(CodeBleu, IdentityIsOne) {
  PythonFrontend py;
  for (const char* src : kLineage) {
    const auto s = codebleu(src, src, {}, &py);
    EXPECT_NEAR(s.total, 1.0, 1e-9);
    ASSERT_TRUE(s.ast && s.df);
    EXPECT_EQ(*s.ast, 1.0);
    EXPECT_EQ(*s.df, 1.0);
    EXPECT_TRUE(s.warnings.empty());
  }
}

TEST(CodeBleu, NgramOnlyWeightsReduceToBleu) {
  CodeBleuOptions o;
  o.lambdas = {1, 0, 0, 0};
  const auto s = codebleu(kLineage[1], kLineage[0], o);
  EXPECT_DOUBLE_EQ(s.total, bleu(tokenize(kLineage[1]), tokenize(kLineage[0]), 4));
}

TEST(CodeBleu, IsAsymmetric) {
  PythonFrontend py;
  const auto xy = codebleu(kLineage[2], kLineage[0], {}, &py).total;
  const auto yx = codebleu(kLineage[0], kLineage[2], {}, &py).total;
  EXPECT_NE(xy, yx);
  for (double v : {xy, yx}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(CodeBleu, SubtreesIgnoreIdentifiersAndDataflowIgnoresNames) {
  PythonFrontend py;
  const auto a = py.parse({"x = a + b\ny = x * 2\nfor i in range(y):\n    x += i\n",
                           "p = q + r\ns = p * 2\nfor k in range(s):\n    p += k\n",
                           "x = a + b\ny = a * 2\nfor i in range(y):\n    x += i\n"});
  ASSERT_TRUE(a[0] && a[1] && a[2]);
  EXPECT_EQ(a[0]->subtrees, a[1]->subtrees);
  EXPECT_EQ(a[0]->dataflow, a[1]->dataflow);
  EXPECT_FALSE(a[0]->dataflow.empty());
  EXPECT_NE(a[0]->dataflow, a[2]->dataflow);
  EXPECT_TRUE(a[0]->subtrees.contains("(BinOp Name Add Name)"));
}

TEST(CodeBleu, UnparsableSourceDropsSyntaxComponents) {
  PythonFrontend py;
  const auto s = codebleu("def broken(:\n  pass", kLineage[0], {}, &py);
  EXPECT_FALSE(s.ast.has_value());
  EXPECT_FALSE(s.df.has_value());
  ASSERT_FALSE(s.warnings.empty());
  EXPECT_DOUBLE_EQ(s.lambdas[0], 0.5);
  EXPECT_DOUBLE_EQ(s.total, 0.5 * s.b + 0.5 * s.bw);
}

TEST(CodeBleu, MissingInterpreterDropsSyntaxComponents) {
  PythonFrontend none("/nonexistent/python3");
  const auto s = codebleu(kLineage[0], kLineage[0], {}, &none);
  EXPECT_FALSE(s.ast.has_value());
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("FrontendUnavailable"), std::string::npos);
  EXPECT_NEAR(s.total, 1.0, 1e-9);
}

TEST(CodeBleu, RejectsBadWeights) {
  CodeBleuOptions o;
  o.lambdas = {0.5, 0.5, 0.5, 0};
  EXPECT_THROW(codebleu("a", "a", o), error);
}

TEST(SimilarityMatrix, UpperTriangle) {
  PythonFrontend py;
  std::vector<std::string> same(3, kLineage[0]);
  const auto m = similarity_matrix(same, {}, &py);
  EXPECT_EQ(m.cells.size(), 3u);
  for (const auto& [ij, s] : m.cells) EXPECT_NEAR(s.total, 1.0, 1e-9);

  const std::vector<std::string> all(std::begin(kLineage), std::end(kLineage));
  const auto l = similarity_matrix(all, {}, &py);
  EXPECT_EQ(l.cells.size(), all.size() * (all.size() - 1) / 2);
  EXPECT_FALSE(l.at(1, 0).has_value());
  EXPECT_FALSE(l.at(2, 2).has_value());
  // Later descendants drift from the first ancestor; the unrelated code is farthest.
  EXPECT_GT(*l.at(0, 1), *l.at(0, 2));
  EXPECT_GT(*l.at(0, 2), *l.at(0, 3));
  EXPECT_GT(*l.at(1, 2), *l.at(0, 2));

  const auto csv = l.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), ",0,1,2,3");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_THROW(similarity_matrix({kLineage[0]}), error);
}

TEST(Relevance, SingleColumnFixture) {
  RelevanceMatrix m{{"a", "b"}, {}, {}, {"o"}, {{3.0}, {-1.0}}};
  const auto r = aggregate_relevance(m);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], 1.0 / 3.0);
}

TEST(Relevance, ComponentMeans) {
  RelevanceMatrix m{{"a", "b", "c"}, {"task", "code"}, {0, 1, 1}, {"o"}, {{3.0}, {-0.5}, {0.5}}};
  const auto c = component_relevance(m);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c[0].mean, 0.75);
  EXPECT_DOUBLE_EQ(c[1].mean, 0.125);
  EXPECT_EQ(c[1].tokens, 2u);
  m.components.push_back("unused");
  EXPECT_THROW(component_relevance(m), error);
}

TEST(Relevance, ScaleInvariantAndConserving) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  RelevanceMatrix m;
  for (int i = 0; i < 12; ++i) m.input_tokens.push_back("t" + std::to_string(i));
  for (int j = 0; j < 7; ++j) m.output_tokens.push_back("o" + std::to_string(j));
  for (int i = 0; i < 12; ++i) {
    m.values.emplace_back();
    for (int j = 0; j < 7; ++j) m.values.back().push_back(g(rng));
  }
  const auto base = aggregate_relevance(m);
  for (double c : {1e-6, 1.0, 1e6}) {
    auto s = m;
    for (auto& row : s.values)
      for (auto& v : row) v *= c;
    const auto r = aggregate_relevance(s);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], base[i], 1e-12) << c;
    const auto n = normalized_columns(s);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < s.rows(); ++i) sum += n[i][j];
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(*std::max_element(base.begin(), base.end()), 1.0);
}

TEST(Relevance, ZeroColumns) {
  RelevanceMatrix m{{"a", "b"}, {}, {}, {"o1", "o2"}, {{1.0, 0.0}, {1.0, 0.0}}};
  const auto n = normalized_columns(m);
  EXPECT_EQ(n[0][1], 0.0);
  EXPECT_EQ(n[0][0], 0.5);
  m.values = {{0.0, 0.0}, {0.0, 0.0}};
  try {
    aggregate_relevance(m);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::all_zero_matrix);
  }
}

TEST(Relevance, IngestsCsvAndJson) {
  const auto m = relevance_from_csv("token,component,o1,o2\nfoo,task,1,-2\n\"a,b\",code,0.5,0\nbar,task,0,1\n");
  EXPECT_EQ(m.input_tokens, (std::vector<std::string>{"foo", "a,b", "bar"}));
  EXPECT_EQ(m.components, (std::vector<std::string>{"task", "code"}));
  EXPECT_EQ(m.component_of, (std::vector<std::size_t>{0, 1, 0}));
  EXPECT_EQ(m.values[0][1], -2.0);
  EXPECT_THROW(relevance_from_csv("token,component,o1\nfoo,task,x\n"), error);
  EXPECT_THROW(relevance_from_csv("token,component,o1\nfoo,task,1,2\n"), error);

  const auto j = relevance_from_json(nlohmann::json::parse(
      R"({"input_tokens":["a","b"],"labels":["x","y"],"output_tokens":["o"],"values":[[3],[-1]]})"));
  EXPECT_EQ(component_relevance(j)[0].mean, 0.75);
}

TEST(Csv, RoundTripsQuotedFields) {
  const std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", "multi\nline"};
  const auto parsed = parse_csv(csv_row(row));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], row);
}

TEST(Report, CompetitionRanksOfPublishedRow) {
  EXPECT_EQ(competition_ranks({0.991, 0.991, 0.765, 1.000, 0.991, 0.856}), (std::vector<int>{2, 2, 6, 1, 2, 5}));
}

TEST(Report, TwoApproaches) {
  const auto t = report_table({{"A", {{"F1", 0.5}}}, {"B", {{"F1", 1.0}}}});
  EXPECT_EQ(t.normalized[0], (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(t.ranks[0], (std::vector<int>{2, 1}));
  EXPECT_EQ(t.average_rank, (std::vector<double>{2.0, 1.0}));
}

TEST(Report, ReproducesPublishedSummaryRows) {
  const std::vector<std::vector<double>> table{
      {0.975, 0.970, 0.942, 1.000, 0.942, 0.972}, {0.806, 1.000, 0.997, 0.865, 0.904, 0.755},
      {1.000, 0.987, 0.966, 0.988, 0.984, 0.964}, {0.986, 1.000, 0.841, 0.985, 0.961, 0.997},
      {0.972, 1.000, 0.694, 0.984, 0.959, 0.984}, {0.994, 0.994, 0.956, 0.990, 1.000, 0.986},
      {0.995, 0.911, 0.830, 0.946, 1.000, 0.982}, {0.965, 1.000, 0.804, 0.976, 0.990, 0.971},
      {1.000, 0.982, 0.779, 0.989, 0.986, 0.984}, {0.973, 0.947, 0.679, 1.000, 0.940, 0.954},
      {0.975, 1.000, 0.741, 0.990, 0.885, 0.972}, {0.756, 0.973, 0.690, 0.747, 0.743, 1.000},
      {0.868, 0.835, 0.567, 0.845, 0.867, 1.000}, {0.876, 0.766, 0.459, 1.000, 0.837, 0.836},
      {1.000, 0.878, 0.661, 0.941, 0.936, 0.868}, {0.986, 0.924, 0.609, 0.967, 1.000, 0.977},
      {1.000, 0.986, 0.897, 0.611, 0.996, 0.806}, {0.959, 0.957, 0.888, 0.949, 0.972, 1.000},
      {0.955, 0.966, 0.720, 1.000, 0.966, 0.881}, {0.940, 0.916, 0.853, 0.948, 0.944, 1.000},
      {0.991, 0.991, 0.765, 1.000, 0.991, 0.856}, {1.000, 0.978, 0.818, 0.877, 0.360, 0.486},
      {1.000, 0.967, 0.854, 0.993, 0.862, 0.993}};
  const std::vector<std::string> names{"BAG", "EoH", "LHNS", "LLaMEA", "MCTS-AHD", "ReEvo"};
  std::map<std::string, std::map<std::string, double>> results;
  for (std::size_t p = 0; p < table.size(); ++p)
    for (std::size_t a = 0; a < names.size(); ++a) {
      char id[8];
      std::snprintf(id, sizeof id, "F%02zu", p + 1);
      results[names[a]][id] = table[p][a];
    }
  const auto t = report_table(results, names);
  const std::vector<double> mean{0.955, 0.953, 0.783, 0.939, 0.914, 0.923};
  const std::vector<double> std{0.064, 0.058, 0.133, 0.093, 0.134, 0.116};
  for (std::size_t a = 0; a < names.size(); ++a) {
    EXPECT_NEAR(t.mean[a], mean[a], 5e-4) << names[a];
    EXPECT_NEAR(t.stddev[a], std[a], 1e-3) << names[a];
  }
  EXPECT_EQ(t.ranks[20], (std::vector<int>{2, 2, 6, 1, 2, 5}));
  const auto csv = t.to_csv();
  EXPECT_NE(csv.find("F21,0.991 (2),0.991 (2),0.765 (6),1.000 (1),0.991 (2),0.856 (5)\n"), std::string::npos);
  EXPECT_NE(csv.find("Mean,0.955,"), std::string::npos);
  EXPECT_NE(csv.find("Average Rank,"), std::string::npos);
}

TEST(Report, RanksAreScaleInvariantTiedPermutations) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 200; ++c) {
    const std::size_t k = 1 + rng() % 7;
    std::vector<double> v(k);
    for (auto& x : v) x = std::round(u(rng) * 4) / 4;  // forces ties
    const auto r = competition_ranks(v);
    std::vector<double> scaled;
    for (double x : v) scaled.push_back(x * 37.5);
    EXPECT_EQ(competition_ranks(scaled), r);
    // Sorted ranks: each rank equals one plus the number of strictly smaller ranks.
    auto s = r;
    std::sort(s.begin(), s.end());
    EXPECT_EQ(s.front(), 1);
    for (std::size_t i = 0; i < s.size(); ++i)
      EXPECT_EQ(s[i], 1 + std::count_if(s.begin(), s.end(), [&](int x) { return x < s[i]; }));
  }
}

TEST(Report, BestApproachNormalizesToOne) {
  const auto t = report_table({{"A", {{"p", 0.2}, {"q", 0.9}}}, {"B", {{"p", 0.4}, {"q", 0.3}}}});
  EXPECT_EQ(t.normalized[0][1], 1.0);
  EXPECT_EQ(t.normalized[1][0], 1.0);
}

TEST(Report, Errors) {
  try {
    report_table({});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::empty_results);
  }
  EXPECT_THROW(report_table({{"A", {{"p", 0.2}}}, {"B", {{"q", 0.4}}}}), error);
}

TEST(FailureRate, CountsFailedRecords) {
  search::SearchResult r;
  EXPECT_EQ(failure_rate(r), 0.0);
  for (int t = 1; t <= 100; ++t) {
    search::CandidateRecord rec;
    rec.t = t;
    if (t % 15 == 0) rec.failure = "NoCodeBlock: x";
    r.records.push_back(rec);
    r.best_so_far_series.push_back(0.1 * (t > 50));
  }
  EXPECT_DOUBLE_EQ(failure_rate(r), 0.06);
  for (auto& rec : r.records) rec.failure = "x";
  EXPECT_EQ(failure_rate(r), 1.0);
  const auto csv = convergence_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 102);
  EXPECT_NE(csv.find("\n51,0,0.10000000000000001\n"), std::string::npos);
}
