#pragma once

// The three end-to-end learners built on the filter: bounded contamination,
// heavy contamination, and the tolerant tester-learner. Each one filters the
// input points (labels carried through untouched), fits a low-degree
// polynomial by least absolute deviations on the survivors, and thresholds.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polyfilter/convex.hpp"
#include "polyfilter/dist.hpp"
#include "polyfilter/filter.hpp"
#include "polyfilter/poly.hpp"

namespace polyfilter {

struct Hypothesis {
  Polynomial p_hat;
  double tau_hat = 0.0;
};

// sign(p_hat(x) + tau_hat) with sign(0) = +1
inline double predict(const Hypothesis& h, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return sign_pm1(evaluate(h.p_hat, x) + h.tau_hat);
}

inline double empirical_error(const Hypothesis& h,
                              const Eigen::Ref<const Eigen::MatrixXd>& xs,
                              const Eigen::Ref<const Eigen::VectorXd>& ys) {
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    if (predict(h, xs.row(i).transpose()) != ys[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(xs.rows());
}

struct LearnerConfig {
  int ell = 1;            // regression degree
  double A = 2.0;         // hypercontractivity constant
  double epsilon = 0.1;
  double delta = 0.1;
  double C_universal = 1.0;
  std::optional<std::size_t> m_override;
  double Q = 1.0;         // heavy-contamination ratio (HC only)
  double tau_tol = 0.1;   // closeness parameter (TT only)
  Domain domain = Domain::real;
  SolverOptions solver;

  void validate() const {
    if (ell < 0) throw std::invalid_argument("LearnerConfig: ell must be >= 0");
    if (A < 1.0) throw std::invalid_argument("LearnerConfig: A must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("LearnerConfig: epsilon must be in (0,1)");
    if (!(delta > 0.0 && delta < 1.0))
      throw std::invalid_argument("LearnerConfig: delta must be in (0,1)");
    if (C_universal <= 0.0)
      throw std::invalid_argument("LearnerConfig: C_universal must be positive");
    if (Q < 1.0) throw std::invalid_argument("LearnerConfig: Q must be >= 1");
  }
};

// Exact minimizer of the empirical misclassification of sign(vals_i + tau)
// over all real tau. The objective is piecewise constant with breakpoints at
// -vals_i; candidates are the midpoints between consecutive distinct
// breakpoints plus one value below the minimum and one above the maximum.
// Ties are broken toward the smallest |tau| (positive first), which keeps
// the learner exactly label-negation symmetric.
inline double best_threshold_values(const Eigen::Ref<const Eigen::VectorXd>& vals,
                                    const Eigen::Ref<const Eigen::VectorXd>& ys) {
  const Eigen::Index n = vals.size();
  if (n == 0) throw std::invalid_argument("best_threshold: empty sample");
  std::vector<double> breaks(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) breaks[static_cast<std::size_t>(i)] = -vals[i];
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> candidates;
  candidates.reserve(breaks.size() + 1);
  candidates.push_back(breaks.front() - 1.0);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
    candidates.push_back(0.5 * (breaks[k] + breaks[k + 1]));
  candidates.push_back(breaks.back() + 1.0);

  auto errors_at = [&](double tau) {
    std::size_t wrong = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (sign_pm1(vals[i] + tau) != ys[i]) ++wrong;
    return wrong;
  };
  auto better = [](double a, double b) {
    const double aa = std::abs(a), ab = std::abs(b);
    return aa < ab || (aa == ab && a > b);
  };
  double best_tau = candidates.front();
  std::size_t best_err = errors_at(best_tau);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const std::size_t err = errors_at(candidates[k]);
    if (err < best_err || (err == best_err && better(candidates[k], best_tau))) {
      best_err = err;
      best_tau = candidates[k];
    }
  }
  return best_tau;
}

inline double best_threshold(const Polynomial& p_hat, const LabeledSet& data) {
  if (data.size() == 0) throw std::invalid_argument("best_threshold: empty sample");
  const Eigen::VectorXd vals = feature_matrix(*p_hat.basis, data.xs) * p_hat.coeffs;
  return best_threshold_values(vals, data.ys);
}

// Phase 2 shared by all learners (and usable standalone as the unfiltered
// baseline): degree-ell least-absolute-deviations fit plus threshold.
inline Hypothesis fit_ptf(const LabeledSet& data, int ell, Domain domain,
                          double l1_tol = 1e-6) {
  if (data.size() == 0) throw std::invalid_argument("fit_ptf: empty sample");
  BasisPtr basis = build_basis(static_cast<int>(data.xs.cols()), ell, domain);
  const Eigen::MatrixXd psi = feature_matrix(*basis, data.xs);
  Eigen::VectorXd coeffs = l1_fit(psi, data.ys, l1_tol);
  Hypothesis h;
  h.p_hat = Polynomial(std::move(basis), std::move(coeffs));
  h.tau_hat = best_threshold_values(psi * h.p_hat.coeffs, data.ys);
  return h;
}

inline LabeledSet select_rows(const LabeledSet& data, const std::vector<std::size_t>& idx) {
  LabeledSet out;
  out.xs.resize(static_cast<Eigen::Index>(idx.size()), data.xs.cols());
  out.ys.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.xs.row(static_cast<Eigen::Index>(k)) =
        data.xs.row(static_cast<Eigen::Index>(idx[k]));
    out.ys[static_cast<Eigen::Index>(k)] = data.ys[static_cast<Eigen::Index>(idx[k])];
  }
  return out;
}

struct LearnOutcome {
  Hypothesis hypothesis;
  FilterReport report;
};

// Bounded contamination: filter at degree 2*ell with R = 2 and
// eps_filter = 24 eps^2 / sqrt(C), then fit at degree ell.
inline LearnOutcome bc_learn(const LabeledSet& input,
                             const Eigen::Ref<const Eigen::MatrixXd>& S_ref,
                             const LearnerConfig& cfg) {
  cfg.validate();
  if (input.size() == 0) throw std::invalid_argument("bc_learn: empty input");
  FilterParams fp;
  fp.m = input.size();
  fp.degree = 2 * cfg.ell;
  fp.R = 2.0;
  fp.epsilon = 24.0 * cfg.epsilon * cfg.epsilon / std::sqrt(cfg.C_universal);
  fp.A = cfg.A;
  if (!(fp.epsilon > 0.0 && fp.epsilon < 1.0))
    throw std::invalid_argument(
        "bc_learn: filter epsilon 24*eps^2/sqrt(C) falls outside (0,1); decrease epsilon "
        "or increase C_universal");
  LearnOutcome out;
  out.report = run_filter(input.xs, S_ref, fp, cfg.domain, cfg.solver);
  const LabeledSet filtered = select_rows(input, out.report.retained);
  out.hypothesis = fit_ptf(filtered, cfg.ell, cfg.domain);
  return out;
}

// Heavy contamination: filter at degree ell with R = 2Q/eps and
// eps_filter = eps/3; the effective size defaults to the declared clean-count
// estimate |input|/Q unless overridden.
inline LearnOutcome hc_learn(const LabeledSet& input,
                             const Eigen::Ref<const Eigen::MatrixXd>& S_ref,
                             const LearnerConfig& cfg) {
  cfg.validate();
  if (input.size() == 0) throw std::invalid_argument("hc_learn: empty input");
  FilterParams fp;
  fp.m = cfg.m_override.value_or(std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(input.size()) / cfg.Q))));
  fp.degree = cfg.ell;
  fp.R = 2.0 * cfg.Q / cfg.epsilon;
  fp.epsilon = cfg.epsilon / 3.0;
  fp.A = cfg.A;
  LearnOutcome out;
  out.report = run_filter(input.xs, S_ref, fp, cfg.domain, cfg.solver);
  const LabeledSet filtered = select_rows(input, out.report.retained);
  out.hypothesis = fit_ptf(filtered, cfg.ell, cfg.domain);
  return out;
}

struct TTOutcome {
  enum class Decision { accept, reject };
  Decision decision = Decision::reject;
  std::optional<Hypothesis> hypothesis;  // present iff accept
  double removed_fraction = 0.0;
  FilterReport report;
};

// Tolerant tester-learner: filter at degree ell with R = 4 tau/eps + 2 and
// eps_filter = eps/8; reject iff the removed fraction exceeds tau + eps/2.
inline TTOutcome tt_learn(const LabeledSet& input,
                          const Eigen::Ref<const Eigen::MatrixXd>& S_ref,
                          const LearnerConfig& cfg) {
  cfg.validate();
  if (input.size() == 0) throw std::invalid_argument("tt_learn: empty input");
  if (!(cfg.tau_tol > 0.0 && cfg.tau_tol < 1.0))
    throw std::invalid_argument("tt_learn: tau_tol must be in (0,1)");
  FilterParams fp;
  fp.m = input.size();
  fp.degree = cfg.ell;
  fp.R = 4.0 * cfg.tau_tol / cfg.epsilon + 2.0;
  fp.epsilon = cfg.epsilon / 8.0;
  fp.A = cfg.A;
  TTOutcome out;
  out.report = run_filter(input.xs, S_ref, fp, cfg.domain, cfg.solver);
  const double m = static_cast<double>(input.size());
  out.removed_fraction = (m - static_cast<double>(out.report.retained.size())) / m;
  if (out.removed_fraction > cfg.tau_tol + cfg.epsilon / 2.0) {
    out.decision = TTOutcome::Decision::reject;
    return out;
  }
  out.decision = TTOutcome::Decision::accept;
  const LabeledSet filtered = select_rows(input, out.report.retained);
  out.hypothesis = fit_ptf(filtered, cfg.ell, cfg.domain);
  return out;
}

}  // namespace polyfilter
