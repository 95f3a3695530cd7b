#pragma once

// File formats owned by the CLI: dataset CSV and JSON serialization of
// hypotheses and filter reports.
//
// Dataset CSV: UTF-8, header `x1,...,xd,y[,tag]`, floats with 17 significant
// digits, y in {-1,1}, optional tag column in {clean,adv}. The tag column is
// simulation bookkeeping and is stripped before any learner sees the data.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyfilter/dist.hpp"
#include "polyfilter/filter.hpp"
#include "polyfilter/learners.hpp"

namespace polyfilter {

using json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string dataset_to_csv(const TaggedDataset& data, bool include_tags) {
  std::ostringstream out;
  const int d = static_cast<int>(data.xs.cols());
  for (int c = 0; c < d; ++c) out << "x" << (c + 1) << ",";
  out << "y";
  if (include_tags) out << ",tag";
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int c = 0; c < d; ++c)
      out << format_double(data.xs(static_cast<Eigen::Index>(i), c)) << ",";
    out << format_double(data.ys[static_cast<Eigen::Index>(i)]);
    if (include_tags) out << "," << (data.tags[i] == Tag::clean ? "clean" : "adv");
    out << "\n";
  }
  return out.str();
}

inline TaggedDataset dataset_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset CSV: missing header");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
  }
  bool has_tags = !cols.empty() && cols.back() == "tag";
  const int d = static_cast<int>(cols.size()) - 1 - (has_tags ? 1 : 0);
  if (d < 1) throw std::runtime_error("dataset CSV: header must list x1..xd and y");
  for (int c = 0; c < d; ++c)
    if (cols[static_cast<std::size_t>(c)] != "x" + std::to_string(c + 1))
      throw std::runtime_error("dataset CSV: unexpected header column " +
                               cols[static_cast<std::size_t>(c)]);
  if (cols[static_cast<std::size_t>(d)] != "y")
    throw std::runtime_error("dataset CSV: missing y column");

  std::vector<std::vector<double>> rows;
  std::vector<Tag> tags;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    if (static_cast<int>(parts.size()) != d + 1 + (has_tags ? 1 : 0))
      throw std::runtime_error("dataset CSV: wrong column count in row");
    std::vector<double> row(static_cast<std::size_t>(d) + 1);
    for (int c = 0; c <= d; ++c) {
      std::size_t used = 0;
      row[static_cast<std::size_t>(c)] = std::stod(parts[static_cast<std::size_t>(c)], &used);
      if (used != parts[static_cast<std::size_t>(c)].size())
        throw std::runtime_error("dataset CSV: malformed number " +
                                 parts[static_cast<std::size_t>(c)]);
    }
    if (row.back() != 1.0 && row.back() != -1.0)
      throw std::runtime_error("dataset CSV: label must be -1 or 1");
    if (has_tags) {
      const std::string& t = parts.back();
      if (t != "clean" && t != "adv")
        throw std::runtime_error("dataset CSV: tag must be clean or adv");
      tags.push_back(t == "clean" ? Tag::clean : Tag::adversarial);
    } else {
      tags.push_back(Tag::clean);
    }
    rows.push_back(std::move(row));
  }
  TaggedDataset data;
  data.xs.resize(static_cast<Eigen::Index>(rows.size()), d);
  data.ys.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < d; ++c) data.xs(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    data.ys[static_cast<Eigen::Index>(i)] = rows[i].back();
  }
  data.tags = std::move(tags);
  return data;
}

inline TaggedDataset dataset_from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  return dataset_from_csv(in);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file " + path);
  out << content;
}

inline std::string domain_name(Domain d) { return d == Domain::real ? "real" : "hypercube"; }

inline json basis_to_json(const PolyBasis& basis) {
  return json{{"d", basis.d}, {"degree", basis.degree}, {"domain", domain_name(basis.domain)}};
}

inline json hypothesis_to_json(const Hypothesis& h) {
  json j;
  j["basis"] = basis_to_json(*h.p_hat.basis);
  j["coeffs"] = std::vector<double>(h.p_hat.coeffs.data(),
                                    h.p_hat.coeffs.data() + h.p_hat.coeffs.size());
  j["tau_hat"] = h.tau_hat;
  return j;
}

inline Hypothesis hypothesis_from_json(const json& j) {
  const json& jb = j.at("basis");
  const std::string dom = jb.at("domain").get<std::string>();
  if (dom != "real" && dom != "hypercube")
    throw std::runtime_error("hypothesis: unknown basis domain " + dom);
  BasisPtr basis = build_basis(jb.at("d").get<int>(), jb.at("degree").get<int>(),
                               dom == "real" ? Domain::real : Domain::hypercube);
  const std::vector<double> coeffs = j.at("coeffs").get<std::vector<double>>();
  if (coeffs.size() != basis->size())
    throw std::runtime_error("hypothesis: coefficient count does not match basis");
  Eigen::VectorXd c(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    c[static_cast<Eigen::Index>(i)] = coeffs[i];
  Hypothesis h;
  h.p_hat = Polynomial(std::move(basis), std::move(c));
  h.tau_hat = j.at("tau_hat").get<double>();
  return h;
}

inline json filter_report_to_json(const FilterReport& report) {
  json j;
  j["basis"] = basis_to_json(*report.basis);
  j["derived"] = json{{"beta", report.derived.beta},
                      {"gamma", report.derived.gamma},
                      {"B", report.derived.B},
                      {"Delta", report.derived.Delta}};
  j["pruned_initial"] = report.pruned_initial;
  j["stop_reason"] =
      report.stop_reason == StopReason::stopping_rule ? "stopping_rule" : "exhausted";
  json its = json::array();
  for (const FilterIteration& it : report.iterations) {
    json ji;
    ji["lambda_star"] = it.lambda_star;
    ji["tau_star"] = it.tau_star;
    ji["removed"] = it.removed;
    ji["violator_coeffs"] = std::vector<double>(
        it.violator_coeffs.data(), it.violator_coeffs.data() + it.violator_coeffs.size());
    its.push_back(std::move(ji));
  }
  j["iterations"] = std::move(its);
  j["retained"] = report.retained;
  return j;
}

}  // namespace polyfilter
