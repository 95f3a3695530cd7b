// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polyfilter/adversaries.hpp"
#include "polyfilter/experiment.hpp"
#include "polyfilter/io.hpp"

using namespace polyfilter;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_partition(const FilterReport& rep, std::size_t M) {
  std::set<std::size_t> seen;
  auto absorb = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx)
      if (i >= M || !seen.insert(i).second)
        throw std::logic_error("filter report does not partition the input");
  };
  absorb(rep.retained);
  absorb(rep.pruned_initial);
  for (const FilterIteration& it : rep.iterations) {
    if (it.removed.empty()) throw std::logic_error("empty removal round");
    absorb(it.removed);
  }
  if (seen.size() != M || rep.iterations.size() > M)
    throw std::logic_error("filter report loses indices or over-iterates");
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion1() {
  auto fp = [](std::size_t m, int deg, double R, double eps, double A) {
    FilterParams p;
    p.m = m;
    p.degree = deg;
    p.R = R;
    p.epsilon = eps;
    p.A = A;
    return p;
  };
  double worst = 0.0;
  {
    const DerivedParams d = derive_params(fp(1, 1, 2.0, 0.5, 1.0), 1);
    worst = std::max(worst, rel_err(d.beta, 8.0));
    worst = std::max(worst, rel_err(d.gamma, 0.125));
    worst = std::max(worst, rel_err(d.B, 16.0 * std::sqrt(2.0)));
    worst = std::max(worst, rel_err(d.Delta, 0.5 / (32.0 * std::sqrt(2.0))));
  }
  {
    const DerivedParams d = derive_params(fp(1, 2, 2.0, 0.5, 2.0), 2);
    worst = std::max(worst, rel_err(d.beta, 512.0));
    worst = std::max(worst, rel_err(d.gamma, 0.125));
    worst = std::max(worst, rel_err(d.B, 384.0));
    worst = std::max(worst, rel_err(d.Delta, 0.5 / 768.0));
  }
  {
    const DerivedParams d = derive_params(fp(1, 1, 10.0, 0.1, 1.0), 1);
    worst = std::max(worst, rel_err(d.beta, 8.0));
    worst = std::max(worst, rel_err(d.gamma, 0.005));
    worst = std::max(worst, rel_err(d.B, 16.0 * std::sqrt(10.0)));
    worst = std::max(worst, rel_err(d.Delta, 0.1 / (32.0 * std::sqrt(10.0))));
  }
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = "max relative error " + std::to_string(worst);
  return o;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2() {
  int solver_ok = 0;
  const int solver_trials = 100;
  for (int t = 0; t < solver_trials; ++t) {
    Rng rng(derive_stream(905, 1, static_cast<std::uint64_t>(t)));
    const int shape = t % 3;  // rank 1, <=2, <=3 families
    const int d = shape == 2 ? 2 : 1;
    const int ell = shape == 0 ? 0 : 1;
    const BasisPtr basis = build_basis(d, ell, Domain::real);
    const int m_ref = 3 + static_cast<int>(rng.next_below(4));
    Eigen::MatrixXd ref(m_ref, d);
    for (int i = 0; i < m_ref; ++i)
      for (int c = 0; c < d; ++c) ref(i, c) = rng.next_gaussian();
    const double beta = 0.5 + rng.next_double();
    const double gamma = (0.3 + 0.9 * rng.next_double()) * std::sqrt(beta);
    const FamilyP fam = make_family(basis, ref, gamma, beta);
    Eigen::VectorXd u(static_cast<Eigen::Index>(basis->size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.next_gaussian();

    const double tol_rel = 1e-3;
    const SolveResult sol = max_linear_over_P(fam, u, tol_rel);
    if (sol.certificate.abs_mean > fam.gamma + 1e-8 ||
        sol.certificate.sq_mean > fam.beta + 1e-8)
      continue;
    const double h =
        (fam.rank() == 3 ? 0.02 : fam.rank() == 2 ? 0.004 : 0.0005) * std::sqrt(beta);
    const SolveResult ora = oracle_max_linear(fam, u, h);
    const double vnorm = (fam.whitened.factor * u).norm();
    const double sqrt_r = std::sqrt(static_cast<double>(fam.rank()));
    double l_g = 0.0;
    for (Eigen::Index i = 0; i < fam.phi.rows(); ++i) l_g += fam.phi.row(i).norm();
    l_g /= static_cast<double>(fam.phi.rows());
    const double scale = std::max(std::abs(ora.value), std::abs(sol.value));
    const double slack = scale * std::max(l_g * h * sqrt_r / (2.0 * gamma),
                                          h * sqrt_r / (2.0 * std::sqrt(beta))) +
                         vnorm * h * sqrt_r / 2.0;
    if (sol.value >= ora.value - (tol_rel * std::abs(ora.value) + slack) &&
        sol.value <= ora.value + tol_rel * std::abs(ora.value) + slack)
      ++solver_ok;
  }

  int l1_ok = 0;
  const int l1_trials = 100;
  for (int t = 0; t < l1_trials; ++t) {
    Rng rng(derive_stream(906, 1, static_cast<std::uint64_t>(t)));
    const int n = 6 + static_cast<int>(rng.next_below(7));   // <= 12 samples
    const int N = 2 + static_cast<int>(rng.next_below(5));   // <= 6 coefficients
    Eigen::MatrixXd f(n, N);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < N; ++c) f(i, c) = rng.next_gaussian();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.next_sign();
    const double fit = l1_objective(f, y, l1_fit(f, y));
    const double ora = l1_objective(f, y, oracle_l1_fit(f, y));
    if (std::abs(fit - ora) <= 1e-6) ++l1_ok;
  }

  Outcome o;
  o.pass = solver_ok == solver_trials && l1_ok == l1_trials;
  o.detail = "max-linear " + std::to_string(solver_ok) + "/100, l1 " +
             std::to_string(l1_ok) + "/100";
  return o;
}

// ----------------------------------------------------- criteria 3 and 4 (shared)

struct FilterWitnessResult {
  int part2_ok = 0;
  int part1_ok = 0;
  std::string reports_json;
};

FilterWitnessResult run_filter_witness() {
  const TargetDistribution cube = make_hypercube(1);
  FilterParams params;
  params.m = 500;
  params.degree = 2;
  params.R = 2.0;
  params.epsilon = 0.3;
  params.A = 1.0;

  // witness q = p^2 - 1 from the exact representation of the degree-1 junta
  // f(x) = x1, carried into the real-domain basis
  const BasisPtr cube1 = build_basis(1, 1, Domain::hypercube);
  const SandwichPair junta_rep =
      exact_junta_sandwich(make_junta({0}, {-1.0, 1.0}), cube1);
  const BasisPtr real1 = build_basis(1, 1, Domain::real);
  Polynomial p_real = Polynomial::zero(real1);
  for (std::size_t i = 0; i < cube1->size(); ++i)
    p_real.coeffs[static_cast<Eigen::Index>(real1->index.at(cube1->monomials[i]))] =
        junta_rep.p_up.coeffs[static_cast<Eigen::Index>(i)];
  Polynomial q = multiply(p_real, p_real);
  q.coeffs[static_cast<Eigen::Index>(q.basis->index.at(MultiIndex{0}))] -= 1.0;

  FilterWitnessResult res;
  std::string reports;
  for (int seed = 0; seed < 50; ++seed) {
    const Eigen::MatrixXd ref =
        sample_unlabeled(cube, 500, derive_stream(777, 1, static_cast<std::uint64_t>(seed)));
    Eigen::MatrixXd xs(500, 1);
    xs.topRows(450) =
        sample_unlabeled(cube, 450, derive_stream(777, 2, static_cast<std::uint64_t>(seed)));
    Rng rng(derive_stream(777, 3, static_cast<std::uint64_t>(seed)));
    for (int i = 450; i < 500; ++i)
      xs(i, 0) = rng.next_sign() * (500.0 + 1000.0 * rng.next_double());

    const FilterReport rep = run_filter(xs, ref, params, Domain::real);
    check_partition(rep, 500);
    reports += filter_report_to_json(rep).dump();
    reports += "\n";

    double sum_q = 0.0;
    for (std::size_t i : rep.retained)
      sum_q += evaluate(q, xs.row(static_cast<Eigen::Index>(i)).transpose());
    if (sum_q <= params.epsilon * static_cast<double>(params.m)) ++res.part2_ok;

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
        static_cast<double>(removed) / params.R +
            params.epsilon * static_cast<double>(params.m) / 2.0)
      ++res.part1_ok;
  }
  res.reports_json = std::move(reports);
  return res;
}

// ------------------------------------------------------------ configs for 5/6/9

const char* kBcFilteredConfig = R"({
  "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
  "concept": {"kind": "halfspace", "w": [1.0, 0.0], "theta": 0.0},
  "contamination": {"model": "bc", "strategy": "far_outlier_flip", "eta": 0.1, "scale": 1000},
  "learner": {"algo": "bc", "ell": 1, "epsilon": 0.1, "delta": 0.05},
  "m": 2000, "m_ref": 1000, "seeds": [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20],
  "eval_sample_size": 20000
})";

const char* kBcBaselineConfig = R"({
  "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
  "concept": {"kind": "halfspace", "w": [1.0, 0.0], "theta": 0.0},
  "contamination": {"model": "bc", "strategy": "far_outlier_flip", "eta": 0.1, "scale": 1000},
  "learner": {"algo": "regress", "ell": 1, "epsilon": 0.1, "delta": 0.05},
  "m": 2000, "m_ref": 1000, "seeds": [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20],
  "eval_sample_size": 20000
})";

const char* kHcConfig = R"({
  "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
  "concept": {"kind": "halfspace", "w": [1.0, -0.5], "theta": 0.0},
  "contamination": {"model": "hc", "strategy": "consistent_cluster", "Q": 2.0},
  "learner": {"algo": "hc", "ell": 1, "epsilon": 0.6, "delta": 0.05},
  "m": 1000, "m_ref": 1000, "seeds": [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20],
  "eval_sample_size": 20000
})";

const char* kTTCompleteConfig = R"({
  "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
  "concept": {"kind": "halfspace", "w": [0.8, 0.6], "theta": 0.1},
  "learner": {"algo": "tt", "ell": 1, "epsilon": 0.3, "delta": 0.05, "tau_tol": 0.1},
  "m": 800, "m_ref": 800, "seeds": [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20],
  "eval_sample_size": 20000
})";

const char* kTTRejectConfig = R"({
  "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
  "concept": {"kind": "halfspace", "w": [0.8, 0.6], "theta": 0.1},
  "contamination": {"model": "bc", "strategy": "far_outlier_flip", "eta": 0.3, "scale": 100},
  "learner": {"algo": "tt", "ell": 1, "epsilon": 0.3, "delta": 0.05, "tau_tol": 0.05},
  "m": 800, "m_ref": 800, "seeds": [1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20],
  "eval_sample_size": 20000
})";

// ---------------------------------------------------------------- criterion 5

Outcome criterion5(std::string* filtered_jsonl, std::string* baseline_jsonl) {
  const ExperimentConfig filtered = parse_config_text(kBcFilteredConfig);
  const ExperimentConfig baseline = parse_config_text(kBcBaselineConfig);
  const std::vector<TrialResult> rf = run_experiment(filtered);
  const std::vector<TrialResult> rb = run_experiment(baseline);
  *filtered_jsonl = results_to_jsonl(rf);
  *baseline_jsonl = results_to_jsonl(rb);
  int good = 0, bad_baseline = 0;
  for (const TrialResult& r : rf)
    if (!r.error && r.clean_error <= 2.0 * 0.1 + 0.15) ++good;
  for (const TrialResult& r : rb)
    if (!r.error && r.clean_error > 0.4) ++bad_baseline;
  Outcome o;
  o.pass = good >= 18 && bad_baseline >= 18;
  o.detail = "filtered error <= 0.35: " + std::to_string(good) +
             "/20, unfiltered error > 0.4: " + std::to_string(bad_baseline) + "/20";
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6(std::string* jsonl) {
  const ExperimentConfig cfg = parse_config_text(kHcConfig);
  const std::vector<TrialResult> rs = run_experiment(cfg);
  *jsonl = results_to_jsonl(rs);
  int good = 0;
  for (const TrialResult& r : rs)
    if (!r.error && !std::isnan(r.opt_total) &&
        r.clean_error <= 2.0 * r.opt_total + 0.15)
      ++good;
  Outcome o;
  o.pass = good >= 18;
  o.detail = "error <= Q*opt_total + 0.15: " + std::to_string(good) + "/20";
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion7() {
  const TargetDistribution cube = make_hypercube(10);
  const Concept f = make_constant(1.0);
  const Concept f_neg = negate_concept(f);
  HCStrategy strat;
  strat.kind = HCKind::duplicate_flip;
  strat.Q = 2.0;
  int identical = 0, opt_exact = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TaggedDataset w1 = contaminate_hc(
        generate_clean(cube, f, 50, derive_stream(55, 1, seed)), strat, seed, cube, f);
    const TaggedDataset w2 = contaminate_hc(
        generate_clean(cube, f_neg, 50, derive_stream(55, 1, seed)), strat, seed, cube,
        f_neg);
    if (dataset_to_csv(w1, false) == dataset_to_csv(w2, false)) ++identical;
    if (opt_total_oracle(learner_view(w1),
                         OptClass::all_functions_on_observed_points) == 0.5)
      ++opt_exact;
  }
  Outcome o;
  o.pass = identical == 20 && opt_exact == 20;
  o.detail = "bit-identical " + std::to_string(identical) + "/20, opt_total exactly 1/2 " +
             std::to_string(opt_exact) + "/20";
  return o;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion8() {
  const TargetDistribution cube = make_hypercube(60);
  const Concept f = make_constant(1.0);
  HCStrategy strat;
  strat.kind = HCKind::constant_vs_flipped;
  strat.Q = 2.0;
  int incomparable = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TaggedDataset input = contaminate_hc(
        generate_clean(cube, f, 30, derive_stream(56, 1, seed)), strat,
        derive_stream(56, 2, seed), cube, f);
    if (no_comparable_pair(input.xs)) ++incomparable;
  }
  Outcome o;
  o.pass = incomparable >= 90;
  o.detail = "no comparable pair in " + std::to_string(incomparable) +
             "/100 (union bound predicts ~100)";
  return o;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9(std::string* complete_jsonl, std::string* reject_jsonl) {
  const ExperimentConfig complete = parse_config_text(kTTCompleteConfig);
  const ExperimentConfig reject = parse_config_text(kTTRejectConfig);
  const std::vector<TrialResult> rc = run_experiment(complete);
  const std::vector<TrialResult> rr = run_experiment(reject);
  *complete_jsonl = results_to_jsonl(rc);
  *reject_jsonl = results_to_jsonl(rr);
  int accepts = 0, rejects = 0;
  bool sound = true;
  auto check_sound = [&](const std::vector<TrialResult>& rs, double tau) {
    for (const TrialResult& r : rs) {
      if (r.error || r.decision != "accept") continue;
      if (std::isnan(r.opt_total) || r.input_error > r.opt_total + tau + 0.2)
        sound = false;
    }
  };
  for (const TrialResult& r : rc)
    if (!r.error && r.decision == "accept") ++accepts;
  for (const TrialResult& r : rr)
    if (!r.error && r.decision == "reject") ++rejects;
  check_sound(rc, 0.1);
  check_sound(rr, 0.05);
  Outcome o;
  o.pass = accepts >= 19 && rejects >= 19 && sound;
  o.detail = "matched marginal accepts " + std::to_string(accepts) +
             "/20, shifted marginal rejects " + std::to_string(rejects) +
             "/20, soundness on accept " + (sound ? "holds" : "violated");
  return o;
}

// ---------------------------------------------------------------- criterion 10

Outcome criterion10(const std::string& c5f, const std::string& c5b, const std::string& c6,
                    const std::string& c9c, const std::string& c9r,
                    const std::string& c34_reports) {
  bool all = true;
  std::string detail;

  std::string f2, b2;
  Outcome o5 = criterion5(&f2, &b2);
  (void)o5;
  if (f2 != c5f || b2 != c5b) {
    all = false;
    detail += "criterion-5 rerun differs; ";
  }
  std::string h2;
  criterion6(&h2);
  if (h2 != c6) {
    all = false;
    detail += "criterion-6 rerun differs; ";
  }
  std::string tc2, tr2;
  criterion9(&tc2, &tr2);
  if (tc2 != c9c || tr2 != c9r) {
    all = false;
    detail += "criterion-9 rerun differs; ";
  }
  if (run_filter_witness().reports_json != c34_reports) {
    all = false;
    detail += "criterion-3/4 rerun differs; ";
  }

#ifdef POLYFILTER_CLI_PATH
  // end-to-end determinism through the CLI binary
  const std::filesystem::path tmp =
      std::filesystem::temp_directory_path() / "polyfilter_acceptance";
  std::filesystem::create_directories(tmp);
  const std::filesystem::path cfg = tmp / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "distribution": {"kind": "gaussian", "d": 2, "A": 2.0},
      "concept": {"kind": "halfspace", "w": [1.0, 0.0], "theta": 0.0},
      "contamination": {"model": "bc", "strategy": "far_outlier_flip", "eta": 0.1, "scale": 1000},
      "learner": {"algo": "bc", "ell": 1, "epsilon": 0.1, "delta": 0.05},
      "m": 300, "m_ref": 300, "seeds": [3, 9], "eval_sample_size": 2000
    })";
  }
  const std::string cli = POLYFILTER_CLI_PATH;
  auto run_cli = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool cli_ok =
      run_cli("gen --config " + cfg.string() + " --out " + (tmp / "a.csv").string() +
              " --seed 11") &&
      run_cli("gen --config " + cfg.string() + " --out " + (tmp / "b.csv").string() +
              " --seed 11") &&
      run_cli("run --config " + cfg.string() + " --out " + (tmp / "a.jsonl").string()) &&
      run_cli("run --config " + cfg.string() + " --out " + (tmp / "b.jsonl").string());
  if (!cli_ok || slurp(tmp / "a.csv") != slurp(tmp / "b.csv") ||
      slurp(tmp / "a.jsonl") != slurp(tmp / "b.jsonl")) {
    all = false;
    detail += "CLI rerun differs; ";
  }
#endif

  Outcome o;
  o.pass = all;
  o.detail = all ? "byte-identical reruns; every filter run terminated with non-empty "
                   "removal rounds"
               : detail;
  return o;
}

// ---------------------------------------------------------------- criterion 11

Outcome criterion11() {
  const TargetDistribution g = make_gaussian(1, 1.0);
  const HypercontractivityReport rep = hypercontractivity_spot_check(g, 1, 2, 3, 4242);
  const double target = std::numbers::pi / 2.0;
  const double dev = std::abs(rep.ratios[0] - target) / target;
  Outcome o;
  o.pass = rep.pass && dev <= 0.02;
  o.detail = "coordinate ratio " + std::to_string(rep.ratios[0]) + " vs pi/2 (" +
             std::to_string(100.0 * dev) + "% off), bound " + std::to_string(rep.bound);
  return o;
}

}  // namespace

int main() {
  struct Row {
    int id;
    std::string name;
    Outcome outcome;
    double seconds;
  };
  std::vector<Row> rows;
  std::string c5f, c5b, c6, c9c, c9r, c34_reports;
  int c3_part2 = 0, c4_part1 = 0;

  auto timed = [&](int id, const std::string& name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(Row{id, name, out, secs});
    std::printf("[%s] criterion %2d: %s (%.1fs) %s\n", out.pass ? "PASS" : "FAIL", id,
                name.c_str(), secs, out.detail.c_str());
    std::fflush(stdout);
  };

  timed(1, "hyperparameter arithmetic", criterion1);
  timed(2, "solver oracle equivalence", criterion2);
  timed(3, "filter part-2 witness", [&] {
    const FilterWitnessResult res = run_filter_witness();
    c34_reports = res.reports_json;
    c3_part2 = res.part2_ok;
    c4_part1 = res.part1_ok;
    Outcome o;
    o.pass = res.part2_ok >= 47;
    o.detail = "sum bound held in " + std::to_string(res.part2_ok) + "/50";
    return o;
  });
  timed(4, "filter part-1 clean retention", [&] {
    Outcome o;
    o.pass = c4_part1 >= 47;
    o.detail = "retention bound held in " + std::to_string(c4_part1) + "/50";
    return o;
  });
  timed(5, "BC end-to-end with filter necessity",
        [&] { return criterion5(&c5f, &c5b); });
  timed(6, "HC positive case", [&] { return criterion6(&c6); });
  timed(7, "HC impossibility reproduction", criterion7);
  timed(8, "monotone hard instance", criterion8);
  timed(9, "tolerant tester-learner", [&] { return criterion9(&c9c, &c9r); });
  timed(10, "determinism and termination",
        [&] { return criterion10(c5f, c5b, c6, c9c, c9r, c34_reports); });
  timed(11, "hypercontractivity spot-check", criterion11);

  int failed = 0;
  for (const Row& r : rows)
    if (!r.outcome.pass) ++failed;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failed,
              rows.size());
  return failed == 0 ? 0 : 1;
}
