// Command-line harness: dataset generation, contamination, filtering,
// learning, evaluation, oracle cross-checks, and the sample-size advisory
// calculator. Exit codes: 0 success, 2 config error, 3 runtime error,
// 4 oracle mismatch.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "polyfilter/adversaries.hpp"
#include "polyfilter/experiment.hpp"
#include "polyfilter/io.hpp"

namespace pf = polyfilter;

namespace {

struct OracleMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pf::ConfigError("config error: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

pf::ExperimentConfig load_config(const std::string& path) {
  return pf::parse_config_text(read_file(path));
}

pf::json load_config_json(const std::string& path) {
  try {
    return pf::json::parse(read_file(path));
  } catch (const pf::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw pf::ConfigError(std::string("config error: invalid JSON: ") + e.what());
  }
}

Eigen::MatrixXd reference_sample(const pf::ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::string& ref_path) {
  if (!ref_path.empty()) {
    const pf::TaggedDataset ds = pf::dataset_from_csv_file(ref_path);
    return ds.xs;
  }
  return pf::sample_unlabeled(cfg.distribution, cfg.m_ref,
                              pf::derive_stream(seed, pf::stream::kReference));
}

int cmd_gen(const std::string& config_path, const std::string& out_path, std::uint64_t seed,
            bool tags) {
  const pf::ExperimentConfig cfg = load_config(config_path);
  const pf::TaggedDataset data = pf::generate_clean(
      cfg.distribution, cfg.concept_spec, cfg.m, pf::derive_stream(seed, pf::stream::kGenerate));
  pf::write_text_file(out_path, pf::dataset_to_csv(data, tags));
  return 0;
}

int cmd_contaminate(const std::string& config_path, const std::string& in_path,
                    const std::string& out_path, std::uint64_t seed) {
  const pf::ExperimentConfig cfg = load_config(config_path);
  const pf::TaggedDataset clean = pf::dataset_from_csv_file(in_path);
  pf::TaggedDataset out;
  const std::uint64_t adv_seed = pf::derive_stream(seed, pf::stream::kContaminate);
  if (cfg.model == "bc")
    out = pf::contaminate_bc(clean, cfg.bc, adv_seed, cfg.concept_spec);
  else if (cfg.model == "hc")
    out = pf::contaminate_hc(clean, cfg.hc, adv_seed, cfg.distribution, cfg.concept_spec);
  else
    out = clean;
  pf::write_text_file(out_path, pf::dataset_to_csv(out, true));
  return 0;
}

int cmd_filter(const std::string& config_path, const std::string& in_path,
               const std::string& out_path, const std::string& report_path,
               const std::string& ref_path, std::uint64_t seed) {
  const pf::json raw = load_config_json(config_path);
  const pf::ExperimentConfig cfg = pf::parse_config(raw);
  const pf::TaggedDataset input = pf::dataset_from_csv_file(in_path);

  pf::FilterParams params;
  params.m = input.size();
  params.degree = cfg.learner.ell;
  params.R = 2.0;
  params.epsilon = cfg.learner.epsilon;
  params.A = cfg.learner.A;
  if (raw.contains("filter")) {
    const pf::json& jf = raw.at("filter");
    if (jf.contains("m")) params.m = jf.at("m").get<std::size_t>();
    if (jf.contains("degree")) params.degree = jf.at("degree").get<int>();
    if (jf.contains("R")) params.R = jf.at("R").get<double>();
    if (jf.contains("epsilon")) params.epsilon = jf.at("epsilon").get<double>();
    if (jf.contains("A")) params.A = jf.at("A").get<double>();
  }
  try {
    params.validate();
  } catch (const std::exception& e) {
    throw pf::ConfigError(std::string("config error: filter: ") + e.what());
  }

  const Eigen::MatrixXd S_ref = reference_sample(cfg, seed, ref_path);
  const pf::FilterReport report =
      pf::run_filter(input.xs, S_ref, params, pf::domain_of(cfg.distribution));
  if (!out_path.empty()) {
    pf::TaggedDataset filtered;
    filtered.xs.resize(static_cast<Eigen::Index>(report.retained.size()), input.xs.cols());
    filtered.ys.resize(static_cast<Eigen::Index>(report.retained.size()));
    for (std::size_t k = 0; k < report.retained.size(); ++k) {
      filtered.xs.row(static_cast<Eigen::Index>(k)) =
          input.xs.row(static_cast<Eigen::Index>(report.retained[k]));
      filtered.ys[static_cast<Eigen::Index>(k)] =
          input.ys[static_cast<Eigen::Index>(report.retained[k])];
      filtered.tags.push_back(input.tags[report.retained[k]]);
    }
    pf::write_text_file(out_path, pf::dataset_to_csv(filtered, true));
  }
  if (!report_path.empty())
    pf::write_text_file(report_path, pf::filter_report_to_json(report).dump(2) + "\n");
  std::cout << "retained " << report.retained.size() << " of " << input.size() << " in "
            << report.iterations.size() << " iterations\n";
  return 0;
}

int cmd_learn(const std::string& algo, const std::string& config_path,
              const std::string& in_path, const std::string& out_path,
              const std::string& ref_path, std::uint64_t seed) {
  const pf::ExperimentConfig cfg = load_config(config_path);
  const pf::TaggedDataset input = pf::dataset_from_csv_file(in_path);
  const pf::LabeledSet view = pf::learner_view(input);
  const Eigen::MatrixXd S_ref = reference_sample(cfg, seed, ref_path);

  pf::json out;
  if (algo == "bc") {
    const pf::LearnOutcome res = pf::bc_learn(view, S_ref, cfg.learner);
    out["hypothesis"] = pf::hypothesis_to_json(res.hypothesis);
    out["filter_report"] = pf::filter_report_to_json(res.report);
  } else if (algo == "hc") {
    const pf::LearnOutcome res = pf::hc_learn(view, S_ref, cfg.learner);
    out["hypothesis"] = pf::hypothesis_to_json(res.hypothesis);
    out["filter_report"] = pf::filter_report_to_json(res.report);
  } else {
    const pf::TTOutcome res = pf::tt_learn(view, S_ref, cfg.learner);
    out["decision"] =
        res.decision == pf::TTOutcome::Decision::accept ? "accept" : "reject";
    out["removed_fraction"] = res.removed_fraction;
    if (res.hypothesis) out["hypothesis"] = pf::hypothesis_to_json(*res.hypothesis);
    out["filter_report"] = pf::filter_report_to_json(res.report);
  }
  if (!out_path.empty())
    pf::write_text_file(out_path, out.dump(2) + "\n");
  else
    std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_path, int threads_override,
            bool verbose) {
  pf::ExperimentConfig cfg = load_config(config_path);
  if (threads_override > 0) cfg.threads = threads_override;
  const std::vector<pf::TrialResult> results = pf::run_experiment(cfg);
  if (verbose)
    for (const pf::TrialResult& r : results)
      std::cerr << "seed " << r.seed << ": " << (r.error ? *r.error : "ok") << " ("
                << r.runtime_ms << " ms)\n";
  const std::string jsonl = pf::results_to_jsonl(results);
  if (!out_path.empty())
    pf::write_text_file(out_path, jsonl);
  else
    std::cout << jsonl;
  return 0;
}

int oracle_l1(std::uint64_t seed, int trials) {
  bool all_pass = true;
  // the two pinned instances
  {
    Eigen::MatrixXd f(3, 1);
    f << 1, 1, 1;
    Eigen::VectorXd y(3);
    y << 1, 1, -1;
    const double fit = pf::l1_objective(f, y, pf::l1_fit(f, y));
    const double ora = pf::l1_objective(f, y, pf::oracle_l1_fit(f, y));
    const bool pass = std::abs(fit - ora) <= 1e-6;
    all_pass &= pass;
    std::cout << "l1 median instance: fit " << fit << " oracle " << ora << " "
              << (pass ? "PASS" : "FAIL") << "\n";
  }
  {
    Eigen::MatrixXd f(4, 2);
    f << 1, 0, 1, 1, 1, 2, 1, 3;
    Eigen::VectorXd y(4);
    y << 1, 1, -1, -1;
    const double fit = pf::l1_objective(f, y, pf::l1_fit(f, y));
    const double ora = pf::l1_objective(f, y, pf::oracle_l1_fit(f, y));
    const bool pass = std::abs(fit - ora) <= 1e-6;
    all_pass &= pass;
    std::cout << "l1 4-point instance: fit " << fit << " oracle " << ora << " "
              << (pass ? "PASS" : "FAIL") << "\n";
  }
  for (int t = 0; t < trials; ++t) {
    pf::Rng rng(pf::derive_stream(seed, 77, static_cast<std::uint64_t>(t)));
    const int n = 6 + static_cast<int>(rng.next_below(7));
    const int N = 2 + static_cast<int>(rng.next_below(4));
    Eigen::MatrixXd f(n, N);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < N; ++c) f(i, c) = rng.next_gaussian();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.next_sign();
    const double fit = pf::l1_objective(f, y, pf::l1_fit(f, y));
    const double ora = pf::l1_objective(f, y, pf::oracle_l1_fit(f, y));
    if (std::abs(fit - ora) > 1e-6) {
      all_pass = false;
      std::cout << "l1 random trial " << t << ": fit " << fit << " oracle " << ora
                << " FAIL\n";
    }
  }
  std::cout << "l1 oracle comparison: " << (all_pass ? "PASS" : "FAIL") << "\n";
  if (!all_pass) throw OracleMismatch("l1_fit disagrees with the subset oracle");
  return 0;
}

int oracle_max_linear(std::uint64_t seed, int trials, double grid_step) {
  bool all_pass = true;
  for (int t = 0; t < trials; ++t) {
    pf::Rng rng(pf::derive_stream(seed, 78, static_cast<std::uint64_t>(t)));
    const int d = 1 + static_cast<int>(rng.next_below(2));
    const int ell = 1;
    const pf::BasisPtr basis = pf::build_basis(d, ell, pf::Domain::real);
    const int m_ref = 3 + static_cast<int>(rng.next_below(4));
    Eigen::MatrixXd ref(m_ref, d);
    for (int i = 0; i < m_ref; ++i)
      for (int c = 0; c < d; ++c) ref(i, c) = rng.next_gaussian();
    const double beta = 0.5 + rng.next_double();
    const double gamma = (0.3 + 0.7 * rng.next_double()) * std::sqrt(beta);
    const pf::FamilyP fam = pf::make_family(basis, ref, gamma, beta);
    Eigen::VectorXd u(static_cast<Eigen::Index>(basis->size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.next_gaussian();
    const pf::SolveResult sol = pf::max_linear_over_P(fam, u);
    const pf::SolveResult ora = pf::oracle_max_linear(fam, u, grid_step);
    const double vnorm = (fam.whitened.factor * u).norm();
    const double slack = vnorm * grid_step * std::sqrt(static_cast<double>(fam.rank())) +
                         std::abs(ora.value) * grid_step;
    const bool pass = sol.value >= ora.value - (1e-3 * std::abs(ora.value) + slack) &&
                      sol.value <= ora.value + 1e-3 * std::abs(ora.value) + slack;
    if (!pass) {
      std::cout << "max-linear trial " << t << ": solver " << sol.value << " oracle "
                << ora.value << " FAIL\n";
      all_pass = false;
    }
  }
  std::cout << "max-linear oracle comparison: " << (all_pass ? "PASS" : "FAIL") << "\n";
  if (!all_pass) throw OracleMismatch("max_linear_over_P disagrees with the grid oracle");
  return 0;
}

int oracle_opt_total(const std::string& in_path, const std::string& cls) {
  const pf::TaggedDataset data = pf::dataset_from_csv_file(in_path);
  const pf::LabeledSet view = pf::learner_view(data);
  pf::OptClass oc;
  if (cls == "halfspaces_2d")
    oc = pf::OptClass::halfspaces_2d;
  else if (cls == "constants")
    oc = pf::OptClass::constants;
  else if (cls == "all_functions")
    oc = pf::OptClass::all_functions_on_observed_points;
  else
    throw pf::ConfigError(
        "config error: --class must be halfspaces_2d, constants or all_functions");
  const double opt = pf::opt_total_oracle(view, oc);
  std::cout << "opt_total = " << pf::format_double(opt) << "\n";
  if (oc == pf::OptClass::halfspaces_2d && view.size() <= 120) {
    const double scan = pf::detail::opt_halfspaces_2d_pairscan(view.xs, view.ys);
    const bool pass = scan == opt;
    std::cout << "sweep vs pair-scan: " << (pass ? "PASS" : "FAIL") << "\n";
    if (!pass) throw OracleMismatch("halfspace sweep disagrees with pair scan");
  }
  return 0;
}

int oracle_no_comparable_pair(const std::string& in_path) {
  const pf::TaggedDataset data = pf::dataset_from_csv_file(in_path);
  std::cout << (pf::no_comparable_pair(data.xs) ? "true" : "false") << "\n";
  return 0;
}

int oracle_hypercontractivity(const std::string& kind, int d, int ell, int t, int trials,
                              std::uint64_t seed, std::size_t samples) {
  const pf::TargetDistribution dist =
      kind == "gaussian" ? pf::make_gaussian(d) : pf::make_hypercube(d);
  const pf::HypercontractivityReport rep = pf::hypercontractivity_spot_check(
      dist, ell, t, static_cast<std::size_t>(trials), seed, samples);
  std::cout << "bound (At)^(ell*t) = " << rep.bound << ", max ratio = " << rep.max_ratio
            << " -> " << (rep.pass ? "PASS" : "FAIL") << "\n";
  if (!rep.pass) throw OracleMismatch("hypercontractivity spot check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative polynomial filtering toolkit"};
  app.require_subcommand(1);

  std::string config_path, in_path, out_path, report_path, ref_path;
  std::uint64_t seed = 1;
  int threads = 0;
  bool verbose = false, tags = false;

  auto* gen = app.add_subcommand("gen", "generate a clean labeled dataset");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_path)->required();
  gen->add_option("--seed", seed);
  gen->add_flag("--tags", tags, "include the tag column");

  auto* cont = app.add_subcommand("contaminate", "apply the configured contamination");
  cont->add_option("--config", config_path)->required();
  cont->add_option("--in", in_path)->required();
  cont->add_option("--out", out_path)->required();
  cont->add_option("--seed", seed);

  auto* filt = app.add_subcommand("filter", "run iterative polynomial filtering");
  filt->add_option("--config", config_path)->required();
  filt->add_option("--in", in_path)->required();
  filt->add_option("--out", out_path, "filtered dataset CSV");
  filt->add_option("--report", report_path, "filter report JSON");
  filt->add_option("--ref", ref_path, "reference sample CSV (generated when absent)");
  filt->add_option("--seed", seed);

  auto* lbc = app.add_subcommand("learn-bc", "bounded-contamination learner");
  auto* lhc = app.add_subcommand("learn-hc", "heavy-contamination learner");
  auto* ltt = app.add_subcommand("tt-learn", "tolerant tester-learner");
  for (auto* cmd : {lbc, lhc, ltt}) {
    cmd->add_option("--config", config_path)->required();
    cmd->add_option("--in", in_path)->required();
    cmd->add_option("--out", out_path);
    cmd->add_option("--ref", ref_path);
    cmd->add_option("--seed", seed);
  }

  auto* run = app.add_subcommand("run", "full seeded experiment");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_path);
  run->add_option("--threads", threads);
  run->add_flag("--verbose", verbose);

  auto* oracle = app.add_subcommand("oracle", "brute-force oracle cross-checks");
  std::string oracle_kind, oracle_class = "halfspaces_2d", dist_kind = "gaussian";
  int trials = 50, o_d = 1, o_ell = 1, o_t = 2;
  double grid_step = 0.02;
  std::size_t samples = 100000;
  oracle->add_option("what", oracle_kind,
                     "l1 | max-linear | opt-total | no-comparable-pair | hypercontractivity")
      ->required();
  oracle->add_option("--in", in_path);
  oracle->add_option("--class", oracle_class);
  oracle->add_option("--seed", seed);
  oracle->add_option("--trials", trials);
  oracle->add_option("--grid-step", grid_step);
  oracle->add_option("--kind", dist_kind);
  oracle->add_option("--d", o_d);
  oracle->add_option("--ell", o_ell);
  oracle->add_option("--t", o_t);
  oracle->add_option("--samples", samples);

  auto* adv = app.add_subcommand("advise", "theoretical sample-size calculator");
  double a_eps = 0.1, a_delta = 0.05, a_A = 1.0, a_R = 2.0, a_C = 1.0, a_Cp = 1.0;
  int a_ell = 1, a_d = 1;
  adv->add_option("--epsilon", a_eps)->required();
  adv->add_option("--delta", a_delta)->required();
  adv->add_option("--ell", a_ell)->required();
  adv->add_option("--d", a_d)->required();
  adv->add_option("--A", a_A);
  adv->add_option("--R", a_R);
  adv->add_option("--C", a_C);
  adv->add_option("--Cprime", a_Cp);

  try {
    app.parse(argc, argv);

    if (gen->parsed()) return cmd_gen(config_path, out_path, seed, tags);
    if (cont->parsed()) return cmd_contaminate(config_path, in_path, out_path, seed);
    if (filt->parsed())
      return cmd_filter(config_path, in_path, out_path, report_path, ref_path, seed);
    if (lbc->parsed()) return cmd_learn("bc", config_path, in_path, out_path, ref_path, seed);
    if (lhc->parsed()) return cmd_learn("hc", config_path, in_path, out_path, ref_path, seed);
    if (ltt->parsed()) return cmd_learn("tt", config_path, in_path, out_path, ref_path, seed);
    if (run->parsed()) return cmd_run(config_path, out_path, threads, verbose);
    if (oracle->parsed()) {
      if (oracle_kind == "l1") return oracle_l1(seed, trials);
      if (oracle_kind == "max-linear") return oracle_max_linear(seed, trials, grid_step);
      if (oracle_kind == "opt-total") {
        if (in_path.empty()) throw pf::ConfigError("config error: oracle opt-total needs --in");
        return oracle_opt_total(in_path, oracle_class);
      }
      if (oracle_kind == "no-comparable-pair") {
        if (in_path.empty())
          throw pf::ConfigError("config error: oracle no-comparable-pair needs --in");
        return oracle_no_comparable_pair(in_path);
      }
      if (oracle_kind == "hypercontractivity")
        return oracle_hypercontractivity(dist_kind, o_d, o_ell, o_t, trials, seed, samples);
      throw pf::ConfigError("config error: unknown oracle sub-command " + oracle_kind);
    }
    if (adv->parsed()) {
      const pf::AdviseReport rep = pf::advise(a_eps, a_delta, a_ell, a_d, a_A, a_R, a_C, a_Cp);
      std::cout << "m_ref >= " << pf::format_double(rep.m_ref_value) << " (ceil "
                << std::ceil(rep.m_ref_value) << ")\n";
      std::cout << "m     >= " << pf::format_double(rep.m_value) << " (ceil "
                << std::ceil(rep.m_value) << ")\n";
      if (rep.degenerate)
        std::cout << "warning: log(1/delta) <= 0, the bounds are degenerate\n";
      return 0;
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const pf::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const OracleMismatch& e) {
    std::cerr << "oracle mismatch: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
