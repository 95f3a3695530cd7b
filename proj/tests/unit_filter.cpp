#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "polyfilter/dist.hpp"
#include "polyfilter/filter.hpp"

using namespace polyfilter;
using Catch::Approx;

namespace {

FilterParams params(std::size_t m, int degree, double R, double eps, double A) {
  FilterParams p;
  p.m = m;
  p.degree = degree;
  p.R = R;
  p.epsilon = eps;
  p.A = A;
  return p;
}

void require_partition(const FilterReport& rep, std::size_t M) {
  std::set<std::size_t> seen;
  auto absorb = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) {
      REQUIRE(i < M);
      REQUIRE(seen.insert(i).second);  // disjointness
    }
  };
  absorb(rep.retained);
  absorb(rep.pruned_initial);
  for (const FilterIteration& it : rep.iterations) {
    REQUIRE_FALSE(it.removed.empty());
    absorb(it.removed);
  }
  REQUIRE(seen.size() == M);
  REQUIRE(rep.iterations.size() <= M);
}

}  // namespace

TEST_CASE("derive_params reproduces the closed forms") {
  {
    const DerivedParams d = derive_params(params(1, 1, 2.0, 0.5, 1.0), 1);
    REQUIRE(d.beta == Approx(8.0).epsilon(1e-12));
    REQUIRE(d.gamma == Approx(0.125).epsilon(1e-12));
    REQUIRE(d.B == Approx(16.0 * std::sqrt(2.0)).epsilon(1e-12));
    REQUIRE(d.Delta == Approx(0.5 / (32.0 * std::sqrt(2.0))).epsilon(1e-12));
  }
  {
    const DerivedParams d = derive_params(params(1, 2, 2.0, 0.5, 2.0), 2);
    REQUIRE(d.beta == Approx(512.0).epsilon(1e-12));
    REQUIRE(d.gamma == Approx(0.125).epsilon(1e-12));
    REQUIRE(d.B == Approx(384.0).epsilon(1e-12));
    REQUIRE(d.Delta == Approx(0.5 / 768.0).epsilon(1e-12));
  }
  {
    const DerivedParams d = derive_params(params(1, 1, 10.0, 0.1, 1.0), 1);
    REQUIRE(d.beta == Approx(8.0).epsilon(1e-12));
    REQUIRE(d.gamma == Approx(0.005).epsilon(1e-12));
    REQUIRE(d.B == Approx(16.0 * std::sqrt(10.0)).epsilon(1e-12));
    REQUIRE(d.Delta == Approx(0.1 / (32.0 * std::sqrt(10.0))).epsilon(1e-12));
  }
  REQUIRE_THROWS_AS(derive_params(params(1, 1, 0.5, 0.5, 1.0), 1), std::invalid_argument);
  REQUIRE_THROWS_AS(derive_params(params(1, 1, 2.0, 1.5, 1.0), 1), std::invalid_argument);
}

TEST_CASE("initial_prune matches the closed-form threshold") {
  // identity whitening from S_ref = {-1, +1}, beta = 8, B = 16*sqrt(2):
  // prune iff sqrt(8)*sqrt(1+x^2) > 16*sqrt(2) iff |x| > sqrt(63)
  const BasisPtr basis = build_basis(1, 1, Domain::real);
  Eigen::MatrixXd ref(2, 1);
  ref << -1.0, 1.0;
  const WhitenedMap w = whiten(moment_matrix(*basis, ref));
  const double B = 16.0 * std::sqrt(2.0);

  Eigen::MatrixXd pts(4, 1);
  pts << 7.9, 7.95, 1e6, 0.0;
  const std::vector<std::size_t> pruned =
      initial_prune(feature_matrix(*basis, pts), w, 8.0, B);
  REQUIRE(pruned == std::vector<std::size_t>{1, 2});

  Eigen::MatrixXd inside(3, 1);
  inside << 0.0, 1.0, -7.0;
  REQUIRE(initial_prune(feature_matrix(*basis, inside), w, 8.0, B).empty());
}

TEST_CASE("find_threshold scans breakpoints") {
  REQUIRE(find_threshold({10.0, 1.0, 1.0}, {0.5, 0.5}, 3, 2.0, 0.1).value() == 0.5);
  REQUIRE(find_threshold({5.0}, {0.0, 0.0}, 1, 2.0, 0.5).value() == 0.0);
  REQUIRE_FALSE(find_threshold({}, {1.0}, 3, 2.0, 0.1).has_value());
  // no candidate satisfies: S mass below the reference everywhere
  REQUIRE_FALSE(find_threshold({1.0}, {1.0, 2.0, 3.0}, 100, 2.0, 0.5).has_value());
}

TEST_CASE("run_filter keeps clean gaussian data") {
  const TargetDistribution g = make_gaussian(1, 2.0);
  int good = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const Eigen::MatrixXd xs = sample_unlabeled(g, 500, 1000 + seed);
    const FilterReport rep =
        run_filter(xs, xs, params(500, 2, 2.0, 0.3, 2.0), Domain::real);
    require_partition(rep, 500);
    if (rep.stop_reason == StopReason::stopping_rule &&
        rep.retained.size() >= 450)
      ++good;
  }
  REQUIRE(good >= 45);
}

TEST_CASE("run_filter prunes a far outlier immediately") {
  const TargetDistribution g = make_gaussian(1, 2.0);
  Eigen::MatrixXd xs = sample_unlabeled(g, 101, 77);
  xs(100, 0) = 1e6;
  const FilterReport rep =
      run_filter(xs, xs.topRows(100), params(101, 2, 2.0, 0.3, 2.0), Domain::real);
  REQUIRE(std::find(rep.pruned_initial.begin(), rep.pruned_initial.end(), 100) !=
          rep.pruned_initial.end());
  require_partition(rep, 101);
}

TEST_CASE("run_filter on an empty input") {
  const TargetDistribution g = make_gaussian(1, 2.0);
  const Eigen::MatrixXd ref = sample_unlabeled(g, 50, 3);
  Eigen::MatrixXd empty(0, 1);
  const FilterReport rep = run_filter(empty, ref, params(1, 1, 2.0, 0.5, 2.0), Domain::real);
  REQUIRE(rep.retained.empty());
  REQUIRE(rep.iterations.empty());
  REQUIRE(rep.stop_reason == StopReason::stopping_rule);
}

TEST_CASE("run_filter removes an in-range adversarial cluster and certifies the stop") {
  const TargetDistribution g = make_gaussian(1, 2.0);
  const SolverOptions opts;
  const FilterParams p = params(160, 1, 2.0, 0.2, 2.0);
  int iterated = 0;
  for (int seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd ref = sample_unlabeled(g, 400, 500 + seed);
    Eigen::MatrixXd xs(160, 1);
    xs.topRows(100) = sample_unlabeled(g, 100, 900 + seed);
    for (int i = 100; i < 160; ++i) xs(i, 0) = 10.0;
    const FilterReport rep = run_filter(xs, ref, p, Domain::real, opts);
    require_partition(rep, 160);
    if (!rep.iterations.empty()) ++iterated;

    // cluster points do not survive
    std::size_t cluster_retained = 0;
    for (std::size_t i : rep.retained)
      if (i >= 100) ++cluster_retained;
    REQUIRE(cluster_retained <= 6);  // Delta-level stragglers at most

    // stopping certificate: re-solving on the retained set obeys the rule
    const DerivedParams dp = rep.derived;
    const FamilyP fam = make_family(rep.basis, ref, dp.gamma, dp.beta);
    const Eigen::MatrixXd psi = feature_matrix(*rep.basis, xs);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(psi.cols());
    for (std::size_t i : rep.retained) u += psi.row(static_cast<Eigen::Index>(i));
    const SolveResult sol = max_linear_over_P(fam, u, opts.tol_rel);
    REQUIRE(sol.value / static_cast<double>(p.m) <=
            p.epsilon / (1.0 - opts.tol_rel) + 1e-12);
  }
  REQUIRE(iterated == 5);
}

TEST_CASE("filter part 2 witness and part 1 retention: hypercube with far outliers") {
  // D* = uniform {-1,1}, real-domain degree-2 basis; witness q = p^2 - 1 from
  // the exact representation of the single-coordinate junta has E|q| = 0 on
  // the cube and blows up on the planted outliers.
  const TargetDistribution cube = make_hypercube(1);
  const FilterParams p = params(500, 2, 2.0, 0.3, 1.0);
  const BasisPtr real2 = build_basis(1, 2, Domain::real);
  Polynomial q = Polynomial::zero(real2);
  q.coeffs[static_cast<Eigen::Index>(real2->index.at(MultiIndex{2}))] = 1.0;
  q.coeffs[static_cast<Eigen::Index>(real2->index.at(MultiIndex{0}))] = -1.0;

  int part2_ok = 0, part1_ok = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd ref = sample_unlabeled(cube, 500, 100 + seed);
    Eigen::MatrixXd xs(500, 1);
    xs.topRows(450) = sample_unlabeled(cube, 450, 200 + seed);
    Rng rng(300 + seed);
    for (int i = 450; i < 500; ++i)
      xs(i, 0) = rng.next_sign() * (500.0 + 1000.0 * rng.next_double());
    const FilterReport rep = run_filter(xs, ref, p, Domain::real);
    require_partition(rep, 500);

    double sum_q = 0.0;
    for (std::size_t i : rep.retained) sum_q += evaluate(q, xs.row(static_cast<Eigen::Index>(i)).transpose());
    if (sum_q <= p.epsilon * static_cast<double>(p.m)) ++part2_ok;

    std::size_t clean_removed = 0, removed = 0;
    auto tally = [&](const std::vector<std::size_t>& idx) {
      for (std::size_t i : idx) {
        ++removed;
        if (i < 450) ++clean_removed;
      }
    };
    tally(rep.pruned_initial);
    for (const FilterIteration& it : rep.iterations) tally(it.removed);
    if (static_cast<double>(clean_removed) <=
        static_cast<double>(removed) / p.R + p.epsilon * static_cast<double>(p.m) / 2.0)
      ++part1_ok;
  }
  REQUIRE(part2_ok >= 9);
  REQUIRE(part1_ok >= 9);
}
