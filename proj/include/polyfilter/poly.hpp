#pragma once

// Multivariate monomial bases, polynomial arithmetic/evaluation, empirical
// moment matrices and whitening over sample sets.
//
// A basis enumerates the monomials of total degree <= degree in graded
// lexicographic order (degree ascending, exponent vectors lexicographically
// descending within a degree), so coefficient vectors are comparable across
// runs. On the hypercube domain every exponent is reduced mod 2 (x_i^2 = 1).

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace polyfilter {

enum class Domain { real, hypercube };

using MultiIndex = std::vector<int>;

struct PolyBasis {
  int d = 0;
  int degree = 0;
  Domain domain = Domain::real;
  std::vector<MultiIndex> monomials;
  std::map<MultiIndex, std::size_t> index;

  std::size_t size() const { return monomials.size(); }
};

using BasisPtr = std::shared_ptr<const PolyBasis>;

namespace detail {

inline void enumerate_monomials(int d, int remaining, int max_exp, MultiIndex& cur,
                                std::vector<MultiIndex>& out) {
  if (static_cast<int>(cur.size()) == d) {
    if (remaining == 0) out.push_back(cur);
    return;
  }
  const int hi = std::min(remaining, max_exp);
  for (int e = hi; e >= 0; --e) {
    cur.push_back(e);
    enumerate_monomials(d, remaining - e, max_exp, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

inline BasisPtr build_basis(int d, int degree, Domain domain) {
  if (d < 1) throw std::invalid_argument("build_basis: d must be >= 1");
  if (degree < 0) throw std::invalid_argument("build_basis: degree must be >= 0");
  auto basis = std::make_shared<PolyBasis>();
  basis->d = d;
  basis->degree = degree;
  basis->domain = domain;
  const int max_exp = (domain == Domain::hypercube) ? 1 : degree;
  for (int t = 0; t <= degree; ++t) {
    MultiIndex cur;
    cur.reserve(d);
    detail::enumerate_monomials(d, t, max_exp, cur, basis->monomials);
  }
  for (std::size_t i = 0; i < basis->monomials.size(); ++i)
    basis->index.emplace(basis->monomials[i], i);
  return basis;
}

inline Eigen::VectorXd feature_vector(const PolyBasis& basis,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != basis.d)
    throw std::invalid_argument("feature_vector: point dimension mismatch");
  if (basis.domain == Domain::hypercube) {
    for (int i = 0; i < x.size(); ++i)
      if (x[i] != 1.0 && x[i] != -1.0)
        throw std::invalid_argument(
            "feature_vector: hypercube domain requires coordinates in {-1,+1}");
  }
  // powers[i][k] = x_i^k
  std::vector<std::vector<double>> powers(basis.d);
  for (int i = 0; i < basis.d; ++i) {
    powers[i].resize(basis.degree + 1);
    powers[i][0] = 1.0;
    for (int k = 1; k <= basis.degree; ++k) powers[i][k] = powers[i][k - 1] * x[i];
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    double v = 1.0;
    const MultiIndex& mi = basis.monomials[j];
    for (int i = 0; i < basis.d; ++i)
      if (mi[i] != 0) v *= powers[i][mi[i]];
    out[static_cast<Eigen::Index>(j)] = v;
  }
  return out;
}

// Rows of the returned matrix are feature vectors of the sample rows.
inline Eigen::MatrixXd feature_matrix(const PolyBasis& basis,
                                      const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  Eigen::MatrixXd out(xs.rows(), static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index r = 0; r < xs.rows(); ++r)
    out.row(r) = feature_vector(basis, xs.row(r).transpose()).transpose();
  return out;
}

struct Polynomial {
  BasisPtr basis;
  Eigen::VectorXd coeffs;

  Polynomial() = default;
  Polynomial(BasisPtr b, Eigen::VectorXd c) : basis(std::move(b)), coeffs(std::move(c)) {
    if (!basis) throw std::invalid_argument("Polynomial: null basis");
    if (coeffs.size() != static_cast<Eigen::Index>(basis->size()))
      throw std::invalid_argument("Polynomial: coefficient count mismatch");
  }

  static Polynomial zero(BasisPtr b) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b->size()));
    return Polynomial(std::move(b), std::move(c));
  }
};

inline double evaluate(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return p.coeffs.dot(feature_vector(*p.basis, x));
}

inline Polynomial multiply(const Polynomial& p, const Polynomial& q) {
  const PolyBasis& bp = *p.basis;
  const PolyBasis& bq = *q.basis;
  if (bp.d != bq.d || bp.domain != bq.domain)
    throw std::invalid_argument("multiply: incompatible bases");
  BasisPtr rb = build_basis(bp.d, bp.degree + bq.degree, bp.domain);
  Eigen::VectorXd rc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rb->size()));
  MultiIndex mi(bp.d);
  for (std::size_t i = 0; i < bp.size(); ++i) {
    if (p.coeffs[static_cast<Eigen::Index>(i)] == 0.0) continue;
    for (std::size_t j = 0; j < bq.size(); ++j) {
      const double c = p.coeffs[static_cast<Eigen::Index>(i)] *
                       q.coeffs[static_cast<Eigen::Index>(j)];
      if (c == 0.0) continue;
      for (int k = 0; k < bp.d; ++k) {
        int e = bp.monomials[i][k] + bq.monomials[j][k];
        if (bp.domain == Domain::hypercube) e %= 2;
        mi[k] = e;
      }
      rc[static_cast<Eigen::Index>(rb->index.at(mi))] += c;
    }
  }
  return Polynomial(std::move(rb), std::move(rc));
}

struct EmpiricalMeans {
  double mean = 0.0;
  double abs_mean = 0.0;
  double sq_mean = 0.0;
};

inline EmpiricalMeans empirical_means(const Polynomial& p,
                                      const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  if (xs.rows() == 0) throw std::invalid_argument("empirical_means: empty sample set");
  EmpiricalMeans m;
  for (Eigen::Index r = 0; r < xs.rows(); ++r) {
    const double v = evaluate(p, xs.row(r).transpose());
    m.mean += v;
    m.abs_mean += std::abs(v);
    m.sq_mean += v * v;
  }
  const double n = static_cast<double>(xs.rows());
  m.mean /= n;
  m.abs_mean /= n;
  m.sq_mean /= n;
  return m;
}

struct MomentMatrix {
  Eigen::MatrixXd entries;
  std::size_t source_count = 0;
};

inline MomentMatrix moment_matrix(const PolyBasis& basis,
                                  const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  if (xs.rows() == 0) throw std::invalid_argument("moment_matrix: empty sample set");
  const Eigen::MatrixXd psi = feature_matrix(basis, xs);
  MomentMatrix m;
  m.entries = (psi.transpose() * psi) / static_cast<double>(xs.rows());
  m.entries = 0.5 * (m.entries + m.entries.transpose().eval());
  m.source_count = static_cast<std::size_t>(xs.rows());
  return m;
}

struct WhitenedMap {
  // factor is r x N with r the numerical rank; phi(x) = factor * psi(x) has
  // empirical second moment equal to the identity over the producing sample.
  Eigen::MatrixXd factor;
  double rank_tolerance = 1e-10;
};

inline WhitenedMap whiten(const MomentMatrix& m, double rank_tol = 1e-10) {
  const Eigen::Index n = m.entries.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.entries);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("whiten: eigendecomposition failed");
  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
  const double lam_max = evals[n - 1];
  if (lam_max <= 0.0)
    throw std::runtime_error("whiten: degenerate sample set (no positive eigenvalue)");
  if (evals[0] < -1e-8 * lam_max)
    throw std::invalid_argument("whiten: input matrix is not PSD within tolerance");
  const double cut = rank_tol * lam_max;
  // canonical row order: eigenvalue descending, leading-entry position as the
  // tie break; canonical sign: the entry of largest magnitude is positive
  struct Row {
    double eigval;
    Eigen::Index lead;
    Eigen::VectorXd vec;
  };
  std::vector<Row> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (evals[i] <= cut) continue;
    Eigen::VectorXd v = eig.eigenvectors().col(i);
    Eigen::Index imax = 0;
    for (Eigen::Index k = 1; k < n; ++k)
      if (std::abs(v[k]) > std::abs(v[imax])) imax = k;
    if (v[imax] < 0.0) v = -v;
    rows.push_back(Row{evals[i], imax, std::move(v)});
  }
  if (rows.empty()) throw std::runtime_error("whiten: degenerate sample set");
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.eigval != b.eigval) return a.eigval > b.eigval;
    return a.lead < b.lead;
  });
  WhitenedMap w;
  w.rank_tolerance = rank_tol;
  w.factor.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r)
    w.factor.row(static_cast<Eigen::Index>(r)) =
        rows[r].vec.transpose() / std::sqrt(rows[r].eigval);
  return w;
}

}  // namespace polyfilter
