#pragma once

// The two convex programs the filtering pipeline relies on, plus brute-force
// oracles for small instances.
//
//  * max_linear_over_P: maximize u.c over the family P of polynomials whose
//    empirical abs-mean over the reference sample is <= gamma and whose
//    empirical square mean is <= beta. Solved in whitened coordinates, where
//    the square-mean cap is a Euclidean ball, by ADMM splitting with an exact
//    trust-region z-step. Termination is certified: for any dual vector y,
//        opt <= gamma*m*||y||_inf + sqrt(beta)*||v - Phi^T y||_2,
//    and the solver stops only once its feasible point reaches (1 - tol_rel)
//    of the best such bound.
//  * l1_fit: least absolute deviations by iteratively reweighted least
//    squares with an annealed smoothing parameter, followed by an
//    exact-interpolation polish step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "polyfilter/poly.hpp"

namespace polyfilter {

struct FamilyP {
  BasisPtr basis;
  Eigen::MatrixXd ref_features;  // one row per reference sample
  double gamma = 0.0;
  double beta = 0.0;
  MomentMatrix moment;
  WhitenedMap whitened;
  // solver cache
  Eigen::MatrixXd phi;        // ref_features * factor^T
  Eigen::VectorXd g_eigvals;  // eigenvalues of phi^T phi, ascending
  Eigen::MatrixXd g_eigvecs;

  std::size_t ref_count() const { return static_cast<std::size_t>(ref_features.rows()); }
  int rank() const { return static_cast<int>(whitened.factor.rows()); }
};

inline FamilyP make_family_from_features(BasisPtr basis, Eigen::MatrixXd ref_features,
                                         double gamma, double beta,
                                         double rank_tol = 1e-10) {
  if (gamma <= 0.0 || beta <= 0.0)
    throw std::invalid_argument("FamilyP: gamma and beta must be positive");
  if (ref_features.rows() == 0)
    throw std::invalid_argument("FamilyP: empty reference sample");
  FamilyP fam;
  fam.basis = std::move(basis);
  fam.ref_features = std::move(ref_features);
  fam.gamma = gamma;
  fam.beta = beta;
  fam.moment.entries = (fam.ref_features.transpose() * fam.ref_features) /
                       static_cast<double>(fam.ref_features.rows());
  fam.moment.entries = 0.5 * (fam.moment.entries + fam.moment.entries.transpose().eval());
  fam.moment.source_count = fam.ref_count();
  fam.whitened = whiten(fam.moment, rank_tol);
  fam.phi = fam.ref_features * fam.whitened.factor.transpose();
  Eigen::MatrixXd gram = fam.phi.transpose() * fam.phi;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("FamilyP: Gram eigendecomposition failed");
  fam.g_eigvals = eig.eigenvalues();
  fam.g_eigvecs = eig.eigenvectors();
  return fam;
}

inline FamilyP make_family(const BasisPtr& basis,
                           const Eigen::Ref<const Eigen::MatrixXd>& ref_xs, double gamma,
                           double beta, double rank_tol = 1e-10) {
  return make_family_from_features(basis, feature_matrix(*basis, ref_xs), gamma, beta,
                                   rank_tol);
}

struct Certificate {
  double abs_mean = 0.0;
  double sq_mean = 0.0;
};

inline Certificate certificate_of(const FamilyP& family,
                                  const Eigen::Ref<const Eigen::VectorXd>& coeffs) {
  const Eigen::VectorXd vals = family.ref_features * coeffs;
  Certificate c;
  c.abs_mean = vals.cwiseAbs().mean();
  c.sq_mean = vals.squaredNorm() / static_cast<double>(vals.size());
  return c;
}

struct SolveResult {
  Eigen::VectorXd coeffs;
  double value = 0.0;
  Certificate certificate;
  bool converged = true;
  int iterations = 0;
};

// Exact supremum of |p(x)| over the square-mean-beta ellipsoid: an upper
// bound for the supremum over P since P is a subset of that ellipsoid.
inline double sup_abs_over_ellipsoid(const Eigen::Ref<const Eigen::VectorXd>& x_features,
                                     const WhitenedMap& whitened, double beta) {
  if (beta < 0.0) throw std::invalid_argument("sup_abs_over_ellipsoid: beta must be >= 0");
  return std::sqrt(beta) * (whitened.factor * x_features).norm();
}

namespace detail {

// Euclidean projection onto the L1 ball of radius t.
inline Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& w, double t) {
  if (w.cwiseAbs().sum() <= t) return w;
  std::vector<double> mags(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    mags[static_cast<std::size_t>(i)] = std::abs(w[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double prefix = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    prefix += mags[k];
    const double cand = (prefix - t) / static_cast<double>(k + 1);
    if (k + 1 == mags.size() || mags[k + 1] <= cand) {
      theta = cand;
      break;
    }
  }
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double m = std::abs(w[i]) - theta;
    out[i] = m > 0.0 ? (w[i] > 0.0 ? m : -m) : 0.0;
  }
  return out;
}

// minimize (rho/2) z^T G z - b.z over ||z|| <= s, via the eigendecomposition
// of G (trust-region secular equation).
inline Eigen::VectorXd ball_quadratic_min(const Eigen::VectorXd& g_eigvals,
                                          const Eigen::MatrixXd& g_eigvecs, double rho,
                                          const Eigen::VectorXd& b, double s) {
  const Eigen::VectorXd bhat = g_eigvecs.transpose() * b;
  Eigen::VectorXd zhat(bhat.size());
  for (Eigen::Index i = 0; i < bhat.size(); ++i)
    zhat[i] = bhat[i] / std::max(rho * g_eigvals[i], 1e-300);
  if (zhat.norm() <= s) return g_eigvecs * zhat;
  double lo = 0.0, hi = bhat.norm() / s;
  for (int it = 0; it < 100; ++it) {
    const double nu = 0.5 * (lo + hi);
    double norm2 = 0.0;
    for (Eigen::Index i = 0; i < bhat.size(); ++i) {
      const double q = bhat[i] / (rho * g_eigvals[i] + nu);
      norm2 += q * q;
    }
    (norm2 > s * s ? lo : hi) = nu;
  }
  const double nu = 0.5 * (lo + hi);
  for (Eigen::Index i = 0; i < bhat.size(); ++i)
    zhat[i] = bhat[i] / (rho * g_eigvals[i] + nu);
  return g_eigvecs * zhat;
}

// Dual bound t*c*||y||_inf + s*||v - c*a||, minimized over the scalar c >= 0.
inline double dual_bound_scaled(double t, double s, const Eigen::VectorXd& v,
                                double y_inf, const Eigen::VectorXd& a) {
  auto U = [&](double c) { return t * c * y_inf + s * (v - c * a).norm(); };
  double lo = 0.0;
  double hi = 1.0;
  const double a2 = a.squaredNorm();
  if (a2 > 0.0) hi = std::max(1.0, 2.0 * std::abs(v.dot(a)) / a2);
  hi = std::max(hi, 2.0);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (U(m1) < U(m2))
      hi = m2;
    else
      lo = m1;
  }
  return std::min(U(0.5 * (lo + hi)), std::min(U(0.0), U(1.0)));
}

}  // namespace detail

struct SolverOptions {
  double tol_rel = 1e-3;
  int max_iterations = 200000;
  double rank_tol = 1e-10;
};

// Maximize u.coeffs over the family P. The returned point is always feasible
// (certificate within the caps up to 1e-8 absolute); value reaches at least
// (1 - tol_rel) of the true optimum unless `converged` is false.
inline SolveResult max_linear_over_P(const FamilyP& family,
                                     const Eigen::Ref<const Eigen::VectorXd>& u,
                                     double tol_rel = 1e-3, int max_iterations = 200000) {
  if (!(tol_rel > 0.0 && tol_rel <= 0.1))
    throw std::invalid_argument("max_linear_over_P: tol_rel must be in (0, 0.1]");
  const Eigen::MatrixXd& W = family.whitened.factor;
  const double m = static_cast<double>(family.ref_count());
  const double s = std::sqrt(family.beta);
  const double t = family.gamma * m;
  const Eigen::VectorXd v = W * u;

  SolveResult res;
  res.coeffs = Eigen::VectorXd::Zero(u.size());
  const double vnorm = v.norm();
  if (vnorm == 0.0) return res;

  auto finish = [&](const Eigen::VectorXd& z, bool converged, int iters) {
    Eigen::VectorXd c = W.transpose() * z;
    // enforce strict feasibility of the returned point
    for (int pass = 0; pass < 3; ++pass) {
      const Certificate cert = certificate_of(family, c);
      double a = 1.0;
      if (cert.abs_mean > family.gamma) a = std::min(a, family.gamma / cert.abs_mean);
      if (cert.sq_mean > family.beta) a = std::min(a, std::sqrt(family.beta / cert.sq_mean));
      if (a >= 1.0) break;
      c *= a * (1.0 - 1e-14);
    }
    res.coeffs = c;
    res.value = u.dot(c);
    res.certificate = certificate_of(family, c);
    res.converged = converged;
    res.iterations = iters;
    return res;
  };

  // If the unconstrained-ellipsoid maximizer already satisfies the abs-mean
  // cap it is optimal outright (it attains the y = 0 dual bound).
  {
    const Eigen::VectorXd z_ell = (s / vnorm) * v;
    if ((family.phi * z_ell).cwiseAbs().sum() / m <= family.gamma * (1.0 + 1e-12))
      return finish(z_ell, true, 0);
  }

  const Eigen::MatrixXd& phi = family.phi;
  Eigen::VectorXd z = (s / vnorm) * v;
  Eigen::VectorXd w = detail::project_l1_ball(phi * z, t);
  Eigen::VectorXd dual = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd w_prev = w;
  double rho = std::max(vnorm / (m * std::max(s, 1e-12)), 1e-8);

  double best_val = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z = Eigen::VectorXd::Zero(z.size());
  double best_bound = s * vnorm;  // y = 0

  const int check_every = 25;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    const Eigen::VectorXd b = v + rho * (phi.transpose() * (w - dual));
    z = detail::ball_quadratic_min(family.g_eigvals, family.g_eigvecs, rho, b, s);
    const Eigen::VectorXd phiz = phi * z;
    w_prev = w;
    w = detail::project_l1_ball(phiz + dual, t);
    dual += phiz - w;

    if (iter % check_every == 0) {
      // feasible primal candidate by radial scaling
      const double abs1 = phiz.cwiseAbs().sum() / m;
      const double sq = phiz.squaredNorm() / m;
      double a = 1.0;
      if (abs1 > family.gamma) a = std::min(a, family.gamma / abs1);
      if (sq > family.beta) a = std::min(a, std::sqrt(family.beta / sq));
      const double val = a * v.dot(z);
      if (val > best_val) {
        best_val = val;
        best_z = a * z;
      }
      // dual bound from the running multiplier
      const Eigen::VectorXd y = rho * dual;
      const double y_inf = y.cwiseAbs().maxCoeff();
      if (y_inf > 0.0) {
        const Eigen::VectorXd aT = phi.transpose() * y;
        best_bound =
            std::min(best_bound, detail::dual_bound_scaled(t, s, v, y_inf, aT));
      }
      if (best_val >= (1.0 - tol_rel) * best_bound - 1e-14 * std::abs(best_bound))
        return finish(best_z, true, iter);
      // residual balancing
      const double pr = (phiz - w).norm();
      const double du = rho * (phi.transpose() * (w - w_prev)).norm();
      if (pr > 10.0 * du) {
        rho *= 2.0;
        dual *= 0.5;
      } else if (du > 10.0 * pr) {
        rho *= 0.5;
        dual *= 2.0;
      }
    }
  }
  return finish(best_z, false, max_iterations);
}

// Exhaustive grid search over the whitened bounding box implied by the
// ellipsoid constraint; verification oracle for rank <= 3 families.
inline SolveResult oracle_max_linear(const FamilyP& family,
                                     const Eigen::Ref<const Eigen::VectorXd>& u,
                                     double grid_step) {
  const int r = family.rank();
  if (r > 3) throw std::invalid_argument("oracle_max_linear: rank must be <= 3");
  if (grid_step <= 0.0) throw std::invalid_argument("oracle_max_linear: bad grid step");
  const Eigen::MatrixXd& W = family.whitened.factor;
  const double m = static_cast<double>(family.ref_count());
  const double s = std::sqrt(family.beta);
  const double t = family.gamma * m;
  const Eigen::VectorXd v = W * u;

  const long steps = static_cast<long>(std::floor(2.0 * s / grid_step)) + 1;
  Eigen::VectorXd z(r), best_z = Eigen::VectorXd::Zero(r);
  double best_val = 0.0;  // z = 0 is always feasible
  std::vector<long> idx(static_cast<std::size_t>(r), 0);
  const Eigen::MatrixXd& phi = family.phi;
  while (true) {
    for (int j = 0; j < r; ++j) z[j] = -s + grid_step * static_cast<double>(idx[j]);
    if (z.squaredNorm() <= family.beta &&
        (phi * z).cwiseAbs().sum() <= t) {
      const double val = v.dot(z);
      if (val > best_val) {
        best_val = val;
        best_z = z;
      }
    }
    int j = 0;
    for (; j < r; ++j) {
      if (++idx[static_cast<std::size_t>(j)] < steps) break;
      idx[static_cast<std::size_t>(j)] = 0;
    }
    if (j == r) break;
  }
  SolveResult res;
  res.coeffs = W.transpose() * best_z;
  res.value = u.dot(res.coeffs);
  res.certificate = certificate_of(family, res.coeffs);
  res.converged = true;
  return res;
}

inline double l1_objective(const Eigen::Ref<const Eigen::MatrixXd>& features,
                           const Eigen::Ref<const Eigen::VectorXd>& labels,
                           const Eigen::Ref<const Eigen::VectorXd>& coeffs) {
  return (labels - features * coeffs).cwiseAbs().mean();
}

// Least absolute deviations: average |y_i - c.psi_i| within tol_abs of the
// minimum.
inline Eigen::VectorXd l1_fit(const Eigen::Ref<const Eigen::MatrixXd>& features,
                              const Eigen::Ref<const Eigen::VectorXd>& labels,
                              double tol_abs = 1e-6) {
  const Eigen::Index n = features.rows();
  const Eigen::Index N = features.cols();
  if (n == 0 || labels.size() != n)
    throw std::invalid_argument("l1_fit: empty input or row/label mismatch");

  Eigen::VectorXd c = features.colPivHouseholderQr().solve(labels);
  Eigen::VectorXd best_c = c;
  double best_obj = l1_objective(features, labels, c);

  const double eps_floor = std::min(tol_abs * 1e-3, 1e-9);
  for (double eps = 1.0; eps >= eps_floor; eps *= 0.1) {
    double prev = std::numeric_limits<double>::infinity();
    for (int inner = 0; inner < 80; ++inner) {
      const Eigen::VectorXd resid = labels - features * c;
      Eigen::VectorXd sw(n);
      double smoothed = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double root = std::sqrt(resid[i] * resid[i] + eps * eps);
        smoothed += root;
        sw[i] = 1.0 / std::sqrt(root);
      }
      if (prev - smoothed <= 1e-14 * std::max(1.0, smoothed) && inner > 0) break;
      prev = smoothed;
      const Eigen::MatrixXd A = sw.asDiagonal() * features;
      const Eigen::VectorXd b = sw.asDiagonal() * labels;
      c = A.colPivHouseholderQr().solve(b);
      const double obj = l1_objective(features, labels, c);
      if (obj < best_obj) {
        best_obj = obj;
        best_c = c;
      }
    }
  }

  // polish: LAD optima interpolate a full set of points; try the ones with
  // the smallest residuals
  {
    const Eigen::VectorXd resid = (labels - features * best_c).cwiseAbs();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return resid[a] < resid[b]; });
    const Eigen::Index k = std::min(N, n);
    Eigen::MatrixXd As(k, N);
    Eigen::VectorXd bs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      As.row(i) = features.row(order[static_cast<std::size_t>(i)]);
      bs[i] = labels[order[static_cast<std::size_t>(i)]];
    }
    const Eigen::VectorXd cand = As.completeOrthogonalDecomposition().solve(bs);
    if (cand.allFinite()) {
      const double obj = l1_objective(features, labels, cand);
      if (obj < best_obj) {
        best_obj = obj;
        best_c = cand;
      }
    }
  }
  return best_c;
}

// Enumerates exact interpolants of every size-N sample subset (plus the zero
// vector) and returns the best; verification oracle justified by the
// basic-solution property of the regression linear program.
inline Eigen::VectorXd oracle_l1_fit(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                     const Eigen::Ref<const Eigen::VectorXd>& labels) {
  const Eigen::Index n = features.rows();
  const Eigen::Index N = features.cols();
  if (n == 0) throw std::invalid_argument("oracle_l1_fit: empty input");
  if (N > 6 || n > 12) throw std::invalid_argument("oracle_l1_fit: instance too large");
  const Eigen::Index k = std::min(N, n);
  Eigen::VectorXd best_c = Eigen::VectorXd::Zero(N);
  double best_obj = l1_objective(features, labels, best_c);
  const double consistency_tol = 1e-8 * (1.0 + labels.cwiseAbs().maxCoeff());
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<Eigen::Index>(__builtin_popcount(mask)) != k) continue;
    Eigen::MatrixXd As(k, N);
    Eigen::VectorXd bs(k);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        As.row(row) = features.row(i);
        bs[row] = labels[i];
        ++row;
      }
    const Eigen::VectorXd c = As.completeOrthogonalDecomposition().solve(bs);
    if (!c.allFinite()) continue;
    if ((As * c - bs).cwiseAbs().maxCoeff() > consistency_tol) continue;
    const double obj = l1_objective(features, labels, c);
    if (obj < best_obj) {
      best_obj = obj;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace polyfilter
