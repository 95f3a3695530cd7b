#pragma once

// Iterative polynomial filtering with a full per-iteration trace.
//
// Given an input set and a reference sample of the target distribution, the
// filter first prunes every point whose feature vector can be driven above B
// by some polynomial in the square-mean-beta ellipsoid (closed form via the
// whitened map), then repeatedly finds the constrained polynomial with the
// largest sum over the retained set and removes the points where its
// magnitude exceeds the smallest admissible threshold.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polyfilter/convex.hpp"
#include "polyfilter/poly.hpp"

namespace polyfilter {

struct FilterParams {
  std::size_t m = 1;   // effective size: the stopping rule compares sums against eps*m
  int degree = 0;      // ell
  double R = 1.0;      // selectivity
  double epsilon = 0.5;
  double A = 1.0;      // hypercontractivity constant of the target distribution

  void validate() const {
    if (m < 1) throw std::invalid_argument("FilterParams: m must be >= 1");
    if (degree < 0) throw std::invalid_argument("FilterParams: degree must be >= 0");
    if (R < 1.0) throw std::invalid_argument("FilterParams: R must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("FilterParams: epsilon must be in (0,1)");
    if (A < 1.0) throw std::invalid_argument("FilterParams: A must be >= 1");
  }
};

struct DerivedParams {
  double beta = 0.0;
  double gamma = 0.0;
  double B = 0.0;
  double Delta = 0.0;
};

inline DerivedParams derive_params(const FilterParams& p, int d) {
  p.validate();
  DerivedParams out;
  out.beta = 2.0 * std::pow(2.0 * p.A, 2.0 * p.degree);
  out.gamma = p.epsilon / (2.0 * p.R);
  out.B = 4.0 * std::pow(static_cast<double>(d) + 1.0, 0.5 * p.degree) *
          std::sqrt(out.beta / p.epsilon);
  out.Delta = p.epsilon / (2.0 * out.B);
  return out;
}

struct FilterIteration {
  Eigen::VectorXd violator_coeffs;
  double lambda_star = 0.0;
  double tau_star = 0.0;
  std::vector<std::size_t> removed;  // indices into the input set
};

enum class StopReason { stopping_rule, exhausted };

struct FilterReport {
  std::vector<std::size_t> retained;
  std::vector<FilterIteration> iterations;
  std::vector<std::size_t> pruned_initial;
  StopReason stop_reason = StopReason::stopping_rule;
  BasisPtr basis;
  FilterParams params;
  DerivedParams derived;

  std::size_t removed_total() const {
    std::size_t n = pruned_initial.size();
    for (const auto& it : iterations) n += it.removed.size();
    return n;
  }
};

// Indices of the points whose ellipsoid supremum exceeds B. This prunes a
// superset of the family-P set of Algorithm 1 line 3: retained points still
// bound every p in P by B, and the clean-removal budget is established for
// the ellipsoid family.
inline std::vector<std::size_t> initial_prune(
    const Eigen::Ref<const Eigen::MatrixXd>& inp_features, const WhitenedMap& whitened,
    double beta, double B) {
  std::vector<std::size_t> pruned;
  const double sb = std::sqrt(beta);
  for (Eigen::Index i = 0; i < inp_features.rows(); ++i) {
    const double sup = sb * (whitened.factor * inp_features.row(i).transpose()).norm();
    if (sup > B) pruned.push_back(static_cast<std::size_t>(i));
  }
  return pruned;
}

// Smallest tau* >= 0 with (|S|/m) Pr_{x~S}[|p*(x)| > tau*]  >=
// R Pr_{x~S_ref}[|p*(x)| > tau*] + Delta. Both sides are right-continuous
// step functions with breakpoints at the observed absolute values, so
// scanning {0} union the distinct values is exact. Returns nullopt when no
// breakpoint satisfies the inequality.
inline std::optional<double> find_threshold(std::vector<double> abs_values_S,
                                            std::vector<double> abs_values_ref,
                                            std::size_t m, double R, double Delta) {
  if (abs_values_S.empty()) return std::nullopt;
  std::vector<double> candidates;
  candidates.reserve(abs_values_S.size() + abs_values_ref.size() + 1);
  candidates.push_back(0.0);
  candidates.insert(candidates.end(), abs_values_S.begin(), abs_values_S.end());
  candidates.insert(candidates.end(), abs_values_ref.begin(), abs_values_ref.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::sort(abs_values_S.begin(), abs_values_S.end());
  std::sort(abs_values_ref.begin(), abs_values_ref.end());
  const double nRef = static_cast<double>(abs_values_ref.size());
  for (double tau : candidates) {
    const auto above_S = abs_values_S.end() -
                         std::upper_bound(abs_values_S.begin(), abs_values_S.end(), tau);
    const auto above_ref =
        abs_values_ref.end() -
        std::upper_bound(abs_values_ref.begin(), abs_values_ref.end(), tau);
    const double lhs = static_cast<double>(above_S) / static_cast<double>(m);
    const double rhs =
        nRef > 0.0 ? R * static_cast<double>(above_ref) / nRef + Delta : Delta;
    if (lhs >= rhs) return tau;
  }
  return std::nullopt;
}

struct FilterContractBreach : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline FilterReport run_filter(const Eigen::Ref<const Eigen::MatrixXd>& S_inp,
                               const Eigen::Ref<const Eigen::MatrixXd>& S_ref,
                               const FilterParams& params, Domain domain,
                               const SolverOptions& opts = {}) {
  params.validate();
  if (S_ref.rows() == 0) throw std::invalid_argument("run_filter: empty reference set");
  if (S_inp.rows() > 0 && S_inp.cols() != S_ref.cols())
    throw std::invalid_argument("run_filter: input/reference dimension mismatch");
  const int d = static_cast<int>(S_ref.cols());
  const std::size_t M = static_cast<std::size_t>(S_inp.rows());

  FilterReport report;
  report.basis = build_basis(d, params.degree, domain);
  report.params = params;
  report.derived = derive_params(params, d);
  const DerivedParams& dp = report.derived;

  const Eigen::MatrixXd psi_ref = feature_matrix(*report.basis, S_ref);
  FamilyP family = make_family_from_features(report.basis, psi_ref, dp.gamma, dp.beta,
                                             opts.rank_tol);
  const Eigen::MatrixXd psi_inp = feature_matrix(*report.basis, S_inp);

  report.pruned_initial = initial_prune(psi_inp, family.whitened, dp.beta, dp.B);
  std::vector<bool> is_pruned(M, false);
  for (std::size_t i : report.pruned_initial) is_pruned[i] = true;
  std::vector<std::size_t> active;
  active.reserve(M);
  for (std::size_t i = 0; i < M; ++i)
    if (!is_pruned[i]) active.push_back(i);

  const double m = static_cast<double>(params.m);
  report.stop_reason = StopReason::exhausted;
  for (std::size_t round = 0; round <= M; ++round) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(psi_inp.cols());
    for (std::size_t i : active) u += psi_inp.row(static_cast<Eigen::Index>(i));
    const SolveResult sol =
        max_linear_over_P(family, u, opts.tol_rel, opts.max_iterations);
    const double lambda = sol.value / m;
    if (lambda / (1.0 - opts.tol_rel) <= params.epsilon) {
      report.stop_reason = StopReason::stopping_rule;
      break;
    }
    std::vector<double> abs_S(active.size());
    for (std::size_t k = 0; k < active.size(); ++k)
      abs_S[k] = std::abs(
          psi_inp.row(static_cast<Eigen::Index>(active[k])).dot(sol.coeffs));
    const Eigen::VectorXd ref_vals = psi_ref * sol.coeffs;
    std::vector<double> abs_ref(ref_vals.size());
    for (Eigen::Index i = 0; i < ref_vals.size(); ++i)
      abs_ref[static_cast<std::size_t>(i)] = std::abs(ref_vals[i]);

    const std::optional<double> tau =
        find_threshold(abs_S, abs_ref, params.m, params.R, dp.Delta);
    if (!tau) {
      if (lambda > params.epsilon / (1.0 - opts.tol_rel))
        throw FilterContractBreach(
            "run_filter: no admissible threshold although lambda* exceeds epsilon "
            "(solver tolerance violated)");
      report.stop_reason = StopReason::stopping_rule;
      break;
    }

    FilterIteration it;
    it.violator_coeffs = sol.coeffs;
    it.lambda_star = lambda;
    it.tau_star = *tau;
    std::vector<std::size_t> keep;
    keep.reserve(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (abs_S[k] > *tau)
        it.removed.push_back(active[k]);
      else
        keep.push_back(active[k]);
    }
    if (it.removed.empty())
      throw std::logic_error("run_filter: admissible threshold removed no points");
    active.swap(keep);
    report.iterations.push_back(std::move(it));
  }
  report.retained = std::move(active);
  return report;
}

}  // namespace polyfilter
