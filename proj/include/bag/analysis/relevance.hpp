#pragma once

// Aggregation of signed token relevance scores (input tokens x output
// tokens) into per-token and per-prompt-component importances. The raw
// scores come from an external attribution tool.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bag/analysis/csv.hpp"
#include "bag/error.hpp"

namespace bag::analysis {

struct RelevanceMatrix {
  std::vector<std::string> input_tokens;
  std::vector<std::string> components;     // declared component names
  std::vector<std::size_t> component_of;   // per input token, index into components
  std::vector<std::string> output_tokens;
  std::vector<std::vector<double>> values;  // [input i][output j]

  std::size_t rows() const { return input_tokens.size(); }
  std::size_t cols() const { return output_tokens.size(); }

  void validate() const {
    if (values.size() != rows()) fail(errc::invalid_argument, "relevance rows do not match input tokens");
    for (const auto& r : values) {
      if (r.size() != cols()) fail(errc::invalid_argument, "relevance columns do not match output tokens");
      for (double v : r)
        if (!std::isfinite(v)) fail(errc::invalid_argument, "relevance values must be finite");
    }
    if (!component_of.empty()) {
      if (component_of.size() != rows()) fail(errc::invalid_argument, "component labels do not cover the input");
      for (auto c : component_of)
        if (c >= components.size()) fail(errc::invalid_argument, "component label out of range");
    }
  }
};

/// |R| normalized per output column to sum 1. All-zero columns stay zero.
inline std::vector<std::vector<double>> normalized_columns(const RelevanceMatrix& m) {
  m.validate();
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols(), 0.0));
  bool any = false;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) sum += std::abs(m.values[i][j]);
    if (sum == 0.0) continue;
    any = true;
    for (std::size_t i = 0; i < m.rows(); ++i) out[i][j] = std::abs(m.values[i][j]) / sum;
  }
  if (!any) fail(errc::all_zero_matrix, "relevance matrix is entirely zero");
  return out;
}

/// Column-normalized sums per input token, before scaling.
inline std::vector<double> token_mass(const RelevanceMatrix& m) {
  const auto n = normalized_columns(m);
  std::vector<double> mass(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : n[i]) mass[i] += v;
  return mass;
}

/// Per input token score in [0, 1]; the most relevant token gets 1.
inline std::vector<double> aggregate_relevance(const RelevanceMatrix& m) {
  auto mass = token_mass(m);
  double top = 0.0;
  for (double v : mass) top = std::max(top, v);
  for (auto& v : mass) v /= top;
  return mass;
}

struct ComponentScore {
  std::string name;
  std::size_t tokens = 0;
  double mean = 0.0;
};

/// Mean token mass per component, in declaration order.
inline std::vector<ComponentScore> component_relevance(const RelevanceMatrix& m) {
  if (m.component_of.size() != m.rows() || m.components.empty())
    fail(errc::invalid_argument, "every input token needs a component label");
  const auto mass = token_mass(m);
  std::vector<ComponentScore> out;
  for (const auto& c : m.components) out.push_back({c, 0, 0.0});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto& c = out[m.component_of[i]];
    ++c.tokens;
    c.mean += mass[i];
  }
  for (auto& c : out) {
    if (c.tokens == 0) fail(errc::empty_component, "component '" + c.name + "' has no tokens");
    c.mean /= static_cast<double>(c.tokens);
  }
  return out;
}

namespace detail {

inline std::size_t component_index(RelevanceMatrix& m, const std::string& name) {
  for (std::size_t k = 0; k < m.components.size(); ++k)
    if (m.components[k] == name) return k;
  m.components.push_back(name);
  return m.components.size() - 1;
}

}  // namespace detail

/// CSV: header `token,component,<out_0>,...,<out_k>`, one row per input
/// token. Components are declared in order of first appearance.
inline RelevanceMatrix relevance_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "token" || rows[0][1] != "component")
    fail(errc::invalid_argument, "relevance CSV needs a 'token,component,...' header");
  RelevanceMatrix m;
  m.output_tokens.assign(rows[0].begin() + 2, rows[0].end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != m.cols() + 2)
      fail(errc::invalid_argument, "relevance CSV row " + std::to_string(r) + " has the wrong width");
    m.input_tokens.push_back(row[0]);
    m.component_of.push_back(detail::component_index(m, row[1]));
    std::vector<double> vals;
    for (std::size_t k = 2; k < row.size(); ++k) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(row[k], &used));
        if (used != row[k].size()) throw std::invalid_argument(row[k]);
      } catch (const std::exception&) {
        fail(errc::invalid_argument, "relevance CSV: bad number '" + row[k] + "'");
      }
    }
    m.values.push_back(std::move(vals));
  }
  m.validate();
  return m;
}

/// JSON: {"input_tokens": [...], "components": [...] (optional),
/// "labels": [...] (component name per input token), "output_tokens":
/// [...], "values": [[...], ...]}.
inline RelevanceMatrix relevance_from_json(const nlohmann::json& j) {
  RelevanceMatrix m;
  m.input_tokens = j.at("input_tokens").get<std::vector<std::string>>();
  m.output_tokens = j.at("output_tokens").get<std::vector<std::string>>();
  m.values = j.at("values").get<std::vector<std::vector<double>>>();
  if (j.contains("components")) m.components = j["components"].get<std::vector<std::string>>();
  if (j.contains("labels"))
    for (const auto& l : j["labels"]) m.component_of.push_back(detail::component_index(m, l.get<std::string>()));
  m.validate();
  return m;
}

inline RelevanceMatrix load_relevance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return relevance_from_json(nlohmann::json::parse(text));
  return relevance_from_csv(text);
}

}  // namespace bag::analysis
