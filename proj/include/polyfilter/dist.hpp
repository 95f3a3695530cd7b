#pragma once

// Target-distribution samplers, ground-truth concepts, labeled dataset
// generation with origin tags, and hypercontractivity spot-checks.
//
// Tags record which samples are clean and which were planted by a
// contamination strategy. They are simulation bookkeeping only: everything a
// learner sees goes through learner_view(), which strips them.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyfilter/poly.hpp"
#include "polyfilter/rng.hpp"

namespace polyfilter {

enum class DistKind { gaussian, hypercube_uniform };

struct TargetDistribution {
  DistKind kind = DistKind::gaussian;
  int d = 1;
  double A = 2.0;  // hypercontractivity constant, configuration value
};

inline TargetDistribution make_gaussian(int d, double A = 2.0) {
  if (d < 1) throw std::invalid_argument("make_gaussian: d must be >= 1");
  if (A < 1.0) throw std::invalid_argument("make_gaussian: A must be >= 1");
  return TargetDistribution{DistKind::gaussian, d, A};
}

inline TargetDistribution make_hypercube(int d, double A = 1.0) {
  if (d < 1) throw std::invalid_argument("make_hypercube: d must be >= 1");
  if (A < 1.0) throw std::invalid_argument("make_hypercube: A must be >= 1");
  return TargetDistribution{DistKind::hypercube_uniform, d, A};
}

inline Domain domain_of(const TargetDistribution& dist) {
  return dist.kind == DistKind::gaussian ? Domain::real : Domain::hypercube;
}

inline double sign_pm1(double v) { return v >= 0.0 ? 1.0 : -1.0; }

enum class ConceptKind {
  halfspace,
  intersection_of_halfspaces,
  degree_k_ptf,
  junta,
  majority,
  constant
};

struct Concept {
  ConceptKind kind = ConceptKind::constant;
  // halfspace / intersection_of_halfspaces
  std::vector<Eigen::VectorXd> weights;
  std::vector<double> offsets;
  // degree_k_ptf
  std::optional<Polynomial> ptf;
  // junta: relevant coordinates and a truth table over all 2^k assignments,
  // indexed by sum_j (x[coords[j]] > 0) << j
  std::vector<int> junta_coords;
  std::vector<double> junta_table;
  // constant
  double constant_sign = 1.0;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    switch (kind) {
      case ConceptKind::halfspace:
        if (weights[0].size() != x.size())
          throw std::invalid_argument("Concept: dimension mismatch");
        return sign_pm1(weights[0].dot(x) - offsets[0]);
      case ConceptKind::intersection_of_halfspaces: {
        for (std::size_t i = 0; i < weights.size(); ++i) {
          if (weights[i].size() != x.size())
            throw std::invalid_argument("Concept: dimension mismatch");
          if (weights[i].dot(x) - offsets[i] < 0.0) return -1.0;
        }
        return 1.0;
      }
      case ConceptKind::degree_k_ptf:
        return sign_pm1(evaluate(*ptf, x));
      case ConceptKind::junta: {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < junta_coords.size(); ++j) {
          if (junta_coords[j] >= x.size())
            throw std::invalid_argument("Concept: dimension mismatch");
          if (x[junta_coords[j]] > 0.0) idx |= (std::size_t{1} << j);
        }
        return junta_table[idx];
      }
      case ConceptKind::majority:
        return sign_pm1(x.sum());
      case ConceptKind::constant:
        return constant_sign;
    }
    throw std::logic_error("Concept: unknown kind");
  }
};

inline Concept make_halfspace(Eigen::VectorXd w, double theta) {
  Concept c;
  c.kind = ConceptKind::halfspace;
  c.weights.push_back(std::move(w));
  c.offsets.push_back(theta);
  return c;
}

inline Concept make_intersection(std::vector<Eigen::VectorXd> ws, std::vector<double> thetas) {
  if (ws.empty() || ws.size() != thetas.size())
    throw std::invalid_argument("make_intersection: weight/offset count mismatch");
  Concept c;
  c.kind = ConceptKind::intersection_of_halfspaces;
  c.weights = std::move(ws);
  c.offsets = std::move(thetas);
  return c;
}

inline Concept make_ptf(Polynomial p) {
  Concept c;
  c.kind = ConceptKind::degree_k_ptf;
  c.ptf = std::move(p);
  return c;
}

inline Concept make_junta(std::vector<int> coords, std::vector<double> table) {
  if (table.size() != (std::size_t{1} << coords.size()))
    throw std::invalid_argument("make_junta: truth table must cover all 2^k assignments");
  for (double v : table)
    if (v != 1.0 && v != -1.0)
      throw std::invalid_argument("make_junta: table values must be +-1");
  Concept c;
  c.kind = ConceptKind::junta;
  c.junta_coords = std::move(coords);
  c.junta_table = std::move(table);
  return c;
}

inline Concept make_majority() {
  Concept c;
  c.kind = ConceptKind::majority;
  return c;
}

inline Concept make_constant(double sign) {
  if (sign != 1.0 && sign != -1.0)
    throw std::invalid_argument("make_constant: sign must be +-1");
  Concept c;
  c.kind = ConceptKind::constant;
  c.constant_sign = sign;
  return c;
}

inline Concept negate_concept(const Concept& f) {
  Concept c = f;
  switch (f.kind) {
    case ConceptKind::constant:
      c.constant_sign = -f.constant_sign;
      return c;
    case ConceptKind::junta:
      for (double& v : c.junta_table) v = -v;
      return c;
    default:
      throw std::invalid_argument("negate_concept: only constant and junta supported");
  }
}

struct LabeledSample {
  Eigen::VectorXd x;
  double y;
};

enum class Tag : std::uint8_t { clean, adversarial };

// Columnar labeled dataset; row i of xs pairs with ys[i] and tags[i].
struct TaggedDataset {
  Eigen::MatrixXd xs;
  Eigen::VectorXd ys;
  std::vector<Tag> tags;

  std::size_t size() const { return static_cast<std::size_t>(xs.rows()); }
  bool empty() const { return size() == 0; }
  LabeledSample sample(std::size_t i) const {
    return {xs.row(static_cast<Eigen::Index>(i)).transpose(),
            ys[static_cast<Eigen::Index>(i)]};
  }
};

// What learners are allowed to see: points and labels, no tags.
struct LabeledSet {
  Eigen::MatrixXd xs;
  Eigen::VectorXd ys;
  std::size_t size() const { return static_cast<std::size_t>(xs.rows()); }
};

inline LabeledSet learner_view(const TaggedDataset& data) { return {data.xs, data.ys}; }

inline Eigen::MatrixXd sample_unlabeled(const TargetDistribution& dist, std::size_t m,
                                        std::uint64_t seed) {
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(m), dist.d);
  Rng rng(seed);
  for (Eigen::Index r = 0; r < xs.rows(); ++r)
    for (int c = 0; c < dist.d; ++c)
      xs(r, c) = dist.kind == DistKind::gaussian ? rng.next_gaussian() : rng.next_sign();
  return xs;
}

inline Eigen::VectorXd label_with_concept(const Concept& target,
                                          const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  Eigen::VectorXd ys(xs.rows());
  for (Eigen::Index r = 0; r < xs.rows(); ++r)
    ys[r] = target(xs.row(r).transpose());
  return ys;
}

inline TaggedDataset generate_clean(const TargetDistribution& dist, const Concept& target,
                                    std::size_t m, std::uint64_t seed) {
  TaggedDataset data;
  data.xs = sample_unlabeled(dist, m, seed);
  data.ys = label_with_concept(target, data.xs);
  data.tags.assign(m, Tag::clean);
  return data;
}

// Test witness: the exact multilinear representation of a junta, returned as
// a zero-gap sandwich pair.
struct SandwichPair {
  Polynomial p_up;
  Polynomial p_down;
  Concept target;
};

inline SandwichPair exact_junta_sandwich(const Concept& target, const BasisPtr& basis) {
  if (target.kind != ConceptKind::junta)
    throw std::invalid_argument("exact_junta_sandwich: concept must be a junta");
  if (basis->domain != Domain::hypercube)
    throw std::invalid_argument("exact_junta_sandwich: basis domain must be hypercube");
  const std::size_t k = target.junta_coords.size();
  if (basis->degree < static_cast<int>(k))
    throw std::invalid_argument("exact_junta_sandwich: basis degree below junta arity");
  Eigen::VectorXd coeffs =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  const std::size_t n_assign = std::size_t{1} << k;
  // Fourier coefficient of each subset T of the relevant coordinates
  for (std::size_t t = 0; t < n_assign; ++t) {
    double fhat = 0.0;
    for (std::size_t a = 0; a < n_assign; ++a) {
      double chi = 1.0;
      for (std::size_t j = 0; j < k; ++j)
        if (t & (std::size_t{1} << j)) chi *= (a & (std::size_t{1} << j)) ? 1.0 : -1.0;
      fhat += target.junta_table[a] * chi;
    }
    fhat /= static_cast<double>(n_assign);
    MultiIndex mi(basis->d, 0);
    for (std::size_t j = 0; j < k; ++j)
      if (t & (std::size_t{1} << j)) mi[target.junta_coords[j]] = 1;
    coeffs[static_cast<Eigen::Index>(basis->index.at(mi))] = fhat;
  }
  Polynomial p(basis, std::move(coeffs));
  return SandwichPair{p, p, target};
}

// Empirical moment-growth ratio E[|p|^t] / (E[|p|])^t over a fresh sample.
inline double hypercontractivity_ratio(const TargetDistribution& dist, const Polynomial& p,
                                       int t, std::size_t sample_size, std::uint64_t seed) {
  if (t != 2 && t != 4) throw std::invalid_argument("hypercontractivity: t must be 2 or 4");
  const Eigen::MatrixXd xs = sample_unlabeled(dist, sample_size, seed);
  double num = 0.0, den = 0.0;
  for (Eigen::Index r = 0; r < xs.rows(); ++r) {
    const double v = std::abs(evaluate(p, xs.row(r).transpose()));
    num += std::pow(v, t);
    den += v;
  }
  num /= static_cast<double>(sample_size);
  den /= static_cast<double>(sample_size);
  if (den == 0.0) return 1.0;  // identically-zero polynomial
  return num / std::pow(den, t);
}

struct HypercontractivityReport {
  double bound = 0.0;      // (A t)^{ell t}
  double max_ratio = 0.0;
  bool pass = true;
  std::vector<double> ratios;  // one per probe; coordinate monomials first
};

// Statistical spot-check of the moment-growth condition on degree-<=ell
// polynomials. Large-sample empirical surrogate only; the first probes are
// the coordinate monomials, the rest are seeded random coefficient vectors.
inline HypercontractivityReport hypercontractivity_spot_check(
    const TargetDistribution& dist, int ell, int t, std::size_t trials, std::uint64_t seed,
    std::size_t sample_size = 100000) {
  if (trials < 1) throw std::invalid_argument("hypercontractivity: trials must be >= 1");
  if (ell < 0) throw std::invalid_argument("hypercontractivity: ell must be >= 0");
  HypercontractivityReport report;
  report.bound = std::pow(dist.A * t, static_cast<double>(ell) * t);
  BasisPtr basis = build_basis(dist.d, ell, domain_of(dist));
  Rng coeff_rng(derive_stream(seed, stream::kProbe));
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
    if (ell >= 1 && trial < static_cast<std::size_t>(dist.d)) {
      // coordinate monomial x_{trial+1}
      MultiIndex mi(dist.d, 0);
      mi[static_cast<int>(trial)] = 1;
      c[static_cast<Eigen::Index>(basis->index.at(mi))] = 1.0;
    } else {
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = coeff_rng.next_gaussian();
    }
    Polynomial p(basis, std::move(c));
    const double ratio = hypercontractivity_ratio(
        dist, p, t, sample_size, derive_stream(seed, stream::kProbe, trial + 1));
    report.ratios.push_back(ratio);
    report.max_ratio = std::max(report.max_ratio, ratio);
  }
  report.pass = report.max_ratio <= report.bound;
  return report;
}

}  // namespace polyfilter
