#pragma once

// Experiment harness: a JSON-configured generate -> contaminate -> learn ->
// evaluate pipeline with per-seed trials, machine-readable JSONL results,
// and the theoretical-sample-size advisory calculator.
//
// Every config field is validated against the module preconditions before
// any trial starts; validation errors name the offending field. Trials are
// isolated: one failing trial records an error string and the rest proceed.
// Results files are byte-identical across re-runs of the same config; wall
// clock timings are kept out of them and reported on the log stream instead.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "polyfilter/adversaries.hpp"
#include "polyfilter/io.hpp"
#include "polyfilter/learners.hpp"

namespace polyfilter {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  TargetDistribution distribution;
  Concept concept_spec;
  // contamination
  std::string model = "none";  // none | bc | hc
  BCStrategy bc;
  HCStrategy hc;
  // learner
  std::string algo = "bc";  // bc | hc | tt | regress
  LearnerConfig learner;
  std::size_t m = 0;
  std::size_t m_ref = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t eval_sample_size = 10000;
  int threads = 1;
};

namespace cfgdetail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError("config error: missing field " + path + key);
  return j.at(key);
}

inline double number_at(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError("config error: " + path + key + " must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError("config error: " + key + " must be a number");
  return j.at(key).get<double>();
}

inline Eigen::VectorXd vector_at(const json& j, const std::string& key,
                                 const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_array()) throw ConfigError("config error: " + path + key + " must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError("config error: " + path + key + " must hold numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

inline Concept parse_concept(const json& j, int d) {
  const std::string kind = require(j, "kind", "concept.").get<std::string>();
  if (kind == "halfspace") {
    Eigen::VectorXd w = vector_at(j, "w", "concept.");
    if (w.size() != d)
      throw ConfigError("config error: concept.w length must equal distribution.d");
    return make_halfspace(std::move(w), number_or(j, "theta", 0.0));
  }
  if (kind == "constant") {
    const double s = number_at(j, "sign", "concept.");
    if (s != 1.0 && s != -1.0)
      throw ConfigError("config error: concept.sign must be -1 or 1");
    return make_constant(s);
  }
  if (kind == "majority") return make_majority();
  if (kind == "junta") {
    const json& jc = require(j, "coords", "concept.");
    const json& jt = require(j, "table", "concept.");
    if (!jc.is_array() || !jt.is_array())
      throw ConfigError("config error: concept.coords and concept.table must be arrays");
    std::vector<int> coords;
    for (const auto& c : jc) {
      const int v = c.get<int>();
      if (v < 0 || v >= d)
        throw ConfigError("config error: concept.coords entries must lie in [0, d)");
      coords.push_back(v);
    }
    std::vector<double> table;
    for (const auto& t : jt) table.push_back(t.get<double>());
    if (table.size() != (std::size_t{1} << coords.size()))
      throw ConfigError("config error: concept.table must have 2^k entries");
    for (double v : table)
      if (v != 1.0 && v != -1.0)
        throw ConfigError("config error: concept.table entries must be -1 or 1");
    return make_junta(std::move(coords), std::move(table));
  }
  if (kind == "intersection") {
    const json& jh = require(j, "halfspaces", "concept.");
    if (!jh.is_array() || jh.empty())
      throw ConfigError("config error: concept.halfspaces must be a non-empty array");
    std::vector<Eigen::VectorXd> ws;
    std::vector<double> thetas;
    for (const auto& h : jh) {
      Eigen::VectorXd w = vector_at(h, "w", "concept.halfspaces.");
      if (w.size() != d)
        throw ConfigError("config error: concept.halfspaces w length must equal distribution.d");
      ws.push_back(std::move(w));
      thetas.push_back(number_or(h, "theta", 0.0));
    }
    return make_intersection(std::move(ws), std::move(thetas));
  }
  if (kind == "ptf") {
    const int degree = static_cast<int>(number_at(j, "degree", "concept."));
    if (degree < 0) throw ConfigError("config error: concept.degree must be >= 0");
    BasisPtr basis = build_basis(d, degree, Domain::real);
    Eigen::VectorXd coeffs = vector_at(j, "coeffs", "concept.");
    if (coeffs.size() != static_cast<Eigen::Index>(basis->size()))
      throw ConfigError("config error: concept.coeffs length must match the basis size");
    return make_ptf(Polynomial(std::move(basis), std::move(coeffs)));
  }
  throw ConfigError("config error: concept.kind must be one of halfspace, constant, "
                    "majority, junta, intersection, ptf");
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const json& j) {
  using namespace cfgdetail;
  ExperimentConfig cfg;

  const json& jd = require(j, "distribution", "");
  const std::string dkind = require(jd, "kind", "distribution.").get<std::string>();
  const int d = static_cast<int>(number_at(jd, "d", "distribution."));
  if (d < 1) throw ConfigError("config error: distribution.d must be >= 1");
  const double dist_A = number_or(jd, "A", dkind == "hypercube" ? 1.0 : 2.0);
  if (dist_A < 1.0) throw ConfigError("config error: distribution.A must be >= 1");
  if (dkind == "gaussian")
    cfg.distribution = make_gaussian(d, dist_A);
  else if (dkind == "hypercube")
    cfg.distribution = make_hypercube(d, dist_A);
  else
    throw ConfigError("config error: distribution.kind must be gaussian or hypercube");

  cfg.concept_spec = parse_concept(require(j, "concept", ""), d);

  if (j.contains("contamination")) {
    const json& jc = j.at("contamination");
    cfg.model = require(jc, "model", "contamination.").get<std::string>();
    if (cfg.model == "bc") {
      const std::string strat = require(jc, "strategy", "contamination.").get<std::string>();
      if (strat == "label_flip")
        cfg.bc.kind = BCKind::label_flip;
      else if (strat == "far_outlier_flip")
        cfg.bc.kind = BCKind::far_outlier_flip;
      else if (strat == "boundary_attack")
        cfg.bc.kind = BCKind::boundary_attack;
      else
        throw ConfigError("config error: contamination.strategy must be label_flip, "
                          "far_outlier_flip or boundary_attack");
      cfg.bc.eta = number_at(jc, "eta", "contamination.");
      if (!(cfg.bc.eta >= 0.0 && cfg.bc.eta < 1.0))
        throw ConfigError("config error: contamination.eta must be in [0,1)");
      cfg.bc.outlier_scale = number_or(jc, "scale", 1e3);
      cfg.bc.margin = number_or(jc, "margin", 0.1);
    } else if (cfg.model == "hc") {
      const std::string strat = require(jc, "strategy", "contamination.").get<std::string>();
      if (strat == "consistent_cluster")
        cfg.hc.kind = HCKind::consistent_cluster;
      else if (strat == "duplicate_flip")
        cfg.hc.kind = HCKind::duplicate_flip;
      else if (strat == "constant_vs_flipped")
        cfg.hc.kind = HCKind::constant_vs_flipped;
      else if (strat == "balanced_flip")
        cfg.hc.kind = HCKind::balanced_flip;
      else
        throw ConfigError("config error: contamination.strategy must be consistent_cluster, "
                          "duplicate_flip, constant_vs_flipped or balanced_flip");
      cfg.hc.Q = number_at(jc, "Q", "contamination.");
      if (cfg.hc.Q < 1.0) throw ConfigError("config error: contamination.Q must be >= 1");
      cfg.hc.spike_factor = number_or(jc, "spike_factor", 10.0);
    } else if (cfg.model != "none") {
      throw ConfigError("config error: contamination.model must be none, bc or hc");
    }
  }

  const json& jl = require(j, "learner", "");
  cfg.algo = require(jl, "algo", "learner.").get<std::string>();
  if (cfg.algo != "bc" && cfg.algo != "hc" && cfg.algo != "tt" && cfg.algo != "regress")
    throw ConfigError("config error: learner.algo must be bc, hc, tt or regress");
  cfg.learner.ell = static_cast<int>(number_at(jl, "ell", "learner."));
  if (cfg.learner.ell < 0) throw ConfigError("config error: learner.ell must be >= 0");
  cfg.learner.epsilon = number_at(jl, "epsilon", "learner.");
  if (!(cfg.learner.epsilon > 0.0 && cfg.learner.epsilon < 1.0))
    throw ConfigError("config error: learner.epsilon must be in (0,1)");
  cfg.learner.delta = number_or(jl, "delta", 0.05);
  if (!(cfg.learner.delta > 0.0 && cfg.learner.delta < 1.0))
    throw ConfigError("config error: learner.delta must be in (0,1)");
  cfg.learner.A = jl.contains("A") ? jl.at("A").get<double>() : cfg.distribution.A;
  if (cfg.learner.A < 1.0) throw ConfigError("config error: learner.A must be >= 1");
  cfg.learner.C_universal = number_or(jl, "C_universal", 1.0);
  if (cfg.learner.C_universal <= 0.0)
    throw ConfigError("config error: learner.C_universal must be positive");
  if (jl.contains("m_override")) {
    const double mo = jl.at("m_override").get<double>();
    if (mo < 1) throw ConfigError("config error: learner.m_override must be >= 1");
    cfg.learner.m_override = static_cast<std::size_t>(mo);
  }
  cfg.learner.Q = number_or(jl, "Q", cfg.model == "hc" ? cfg.hc.Q : 1.0);
  if (cfg.learner.Q < 1.0) throw ConfigError("config error: learner.Q must be >= 1");
  cfg.learner.tau_tol = number_or(jl, "tau_tol", 0.1);
  if (cfg.algo == "tt" && !(cfg.learner.tau_tol > 0.0 && cfg.learner.tau_tol < 1.0))
    throw ConfigError("config error: learner.tau_tol must be in (0,1)");
  cfg.learner.domain = domain_of(cfg.distribution);
  if (cfg.algo == "bc") {
    const double ef = 24.0 * cfg.learner.epsilon * cfg.learner.epsilon /
                      std::sqrt(cfg.learner.C_universal);
    if (!(ef > 0.0 && ef < 1.0))
      throw ConfigError("config error: learner.epsilon yields a filter target "
                        "24*epsilon^2/sqrt(C_universal) outside (0,1)");
  }

  const double m = cfgdetail::number_at(j, "m", "");
  if (m < 1) throw ConfigError("config error: m must be >= 1");
  cfg.m = static_cast<std::size_t>(m);
  const double m_ref = cfgdetail::number_at(j, "m_ref", "");
  if (m_ref < 1) throw ConfigError("config error: m_ref must be >= 1");
  cfg.m_ref = static_cast<std::size_t>(m_ref);

  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty())
      throw ConfigError("config error: seeds must be a non-empty array");
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
  } else {
    const double trials = cfgdetail::number_at(j, "trials", "");
    if (trials < 1) throw ConfigError("config error: trials must be >= 1");
    const std::uint64_t base =
        j.contains("base_seed") ? j.at("base_seed").get<std::uint64_t>() : 1;
    for (std::uint64_t t = 0; t < static_cast<std::uint64_t>(trials); ++t)
      cfg.seeds.push_back(base + t);
  }
  const double ev = cfgdetail::number_or(j, "eval_sample_size", 10000);
  if (ev < 1) throw ConfigError("config error: eval_sample_size must be >= 1");
  cfg.eval_sample_size = static_cast<std::size_t>(ev);
  cfg.threads = static_cast<int>(cfgdetail::number_or(j, "threads", 1));
  if (cfg.threads < 1) throw ConfigError("config error: threads must be >= 1");
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config error: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

struct TrialResult {
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  double clean_error = std::numeric_limits<double>::quiet_NaN();
  double input_error = std::numeric_limits<double>::quiet_NaN();  // tt only
  double benchmark = std::numeric_limits<double>::quiet_NaN();
  double opt_total = std::numeric_limits<double>::quiet_NaN();
  std::size_t removed_clean = 0;
  std::size_t removed_adversarial = 0;
  std::size_t iterations = 0;
  std::optional<std::string> decision;  // tt only
  double runtime_ms = 0.0;              // log output only, never serialized
};

inline TaggedDataset make_input_dataset(const ExperimentConfig& cfg, std::uint64_t gen_seed,
                                        std::uint64_t adv_seed) {
  TaggedDataset clean =
      generate_clean(cfg.distribution, cfg.concept_spec, cfg.m, gen_seed);
  if (cfg.model == "bc")
    return contaminate_bc(clean, cfg.bc, adv_seed, cfg.concept_spec);
  if (cfg.model == "hc")
    return contaminate_hc(clean, cfg.hc, adv_seed, cfg.distribution, cfg.concept_spec);
  return clean;
}

// opt_total of the concept class on the given set, when a brute-force oracle
// covers the instance; NaN otherwise.
inline double try_opt_total(const ExperimentConfig& cfg, const LabeledSet& input) {
  if (cfg.concept_spec.kind == ConceptKind::constant)
    return opt_total_oracle(input, OptClass::constants);
  if (cfg.concept_spec.kind == ConceptKind::halfspace && cfg.distribution.d == 2 &&
      input.size() <= 2000)
    return opt_total_oracle(input, OptClass::halfspaces_2d);
  return std::numeric_limits<double>::quiet_NaN();
}

inline TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrialResult res;
  res.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const std::uint64_t gen_seed = derive_stream(seed, stream::kGenerate);
    const std::uint64_t adv_seed = derive_stream(seed, stream::kContaminate);
    const std::uint64_t ref_seed = derive_stream(seed, stream::kReference);
    const std::uint64_t eval_seed = derive_stream(seed, stream::kEvaluate);

    const TaggedDataset input = make_input_dataset(cfg, gen_seed, adv_seed);
    const LabeledSet view = learner_view(input);
    const Eigen::MatrixXd S_ref =
        sample_unlabeled(cfg.distribution, cfg.m_ref, ref_seed);

    std::optional<Hypothesis> hypothesis;
    const FilterReport* report = nullptr;
    LearnOutcome outcome;
    TTOutcome tt;
    if (cfg.algo == "bc") {
      outcome = bc_learn(view, S_ref, cfg.learner);
      hypothesis = outcome.hypothesis;
      report = &outcome.report;
    } else if (cfg.algo == "hc") {
      outcome = hc_learn(view, S_ref, cfg.learner);
      hypothesis = outcome.hypothesis;
      report = &outcome.report;
    } else if (cfg.algo == "tt") {
      tt = tt_learn(view, S_ref, cfg.learner);
      hypothesis = tt.hypothesis;
      report = &tt.report;
      res.decision = tt.decision == TTOutcome::Decision::accept ? "accept" : "reject";
    } else {  // regress: the unfiltered baseline
      hypothesis = fit_ptf(view, cfg.learner.ell, cfg.learner.domain);
    }

    if (report) {
      res.iterations = report->iterations.size();
      auto count = [&](const std::vector<std::size_t>& idx) {
        for (std::size_t i : idx)
          (input.tags[i] == Tag::clean ? res.removed_clean : res.removed_adversarial) += 1;
      };
      count(report->pruned_initial);
      for (const FilterIteration& it : report->iterations) count(it.removed);
    }

    if (hypothesis) {
      const TaggedDataset eval = generate_clean(cfg.distribution, cfg.concept_spec,
                                                cfg.eval_sample_size, eval_seed);
      res.clean_error = empirical_error(*hypothesis, eval.xs, eval.ys);
      if (cfg.algo == "tt") {
        // soundness is stated against the input distribution: draw a fresh
        // input-sized sample through the same pipeline
        const TaggedDataset fresh_input = make_input_dataset(
            cfg, derive_stream(seed, stream::kEvaluate, 1), adv_seed);
        res.input_error = empirical_error(*hypothesis, fresh_input.xs, fresh_input.ys);
      }
    }

    const double eps = cfg.learner.epsilon;
    if (cfg.model == "bc") {
      res.benchmark = 2.0 * cfg.bc.eta + eps;
    } else if (cfg.model == "hc") {
      res.opt_total = try_opt_total(cfg, view);
      res.benchmark = cfg.learner.Q * res.opt_total + eps;
    } else if (cfg.algo == "tt") {
      res.opt_total = try_opt_total(cfg, view);
      res.benchmark = res.opt_total + cfg.learner.tau_tol + eps;
    } else {
      res.benchmark = eps;
    }
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  res.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return res;
}

inline std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  std::vector<TrialResult> results(cfg.seeds.size());
  if (cfg.threads <= 1 || cfg.seeds.size() <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      results[i] = run_trial(cfg, cfg.seeds[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      results[i] = run_trial(cfg, cfg.seeds[i]);
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min<int>(cfg.threads, static_cast<int>(cfg.seeds.size()));
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return results;  // indexed by seed position: schedule-independent
}

inline json trial_to_json(const TrialResult& r) {
  json j;
  j["seed"] = r.seed;
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["clean_error"] = r.clean_error;
  if (!std::isnan(r.input_error)) j["input_error"] = r.input_error;
  j["benchmark"] = r.benchmark;
  if (!std::isnan(r.opt_total)) j["opt_total"] = r.opt_total;
  j["removed_clean"] = r.removed_clean;
  j["removed_adversarial"] = r.removed_adversarial;
  j["iterations"] = r.iterations;
  if (r.decision) j["decision"] = *r.decision;
  return j;
}

// JSON Lines: one record per trial plus a trailing summary record.
inline std::string results_to_jsonl(const std::vector<TrialResult>& results) {
  std::string out;
  std::size_t failed = 0, met = 0, comparable = 0;
  double err_sum = 0.0;
  std::size_t err_count = 0;
  for (const TrialResult& r : results) {
    out += trial_to_json(r).dump();
    out += "\n";
    if (r.error) {
      ++failed;
      continue;
    }
    if (!std::isnan(r.clean_error)) {
      err_sum += r.clean_error;
      ++err_count;
      if (!std::isnan(r.benchmark)) {
        ++comparable;
        if (r.clean_error <= r.benchmark) ++met;
      }
    }
  }
  json summary;
  summary["summary"] = true;
  summary["trials"] = results.size();
  summary["failed"] = failed;
  summary["mean_clean_error"] =
      err_count > 0 ? err_sum / static_cast<double>(err_count)
                    : std::numeric_limits<double>::quiet_NaN();
  summary["benchmark_met_fraction"] =
      comparable > 0 ? static_cast<double>(met) / static_cast<double>(comparable)
                     : std::numeric_limits<double>::quiet_NaN();
  out += summary.dump();
  out += "\n";
  return out;
}

// Theoretical sample-size formulas; advisory only, never enforced.
struct AdviseReport {
  double m_ref_value = 0.0;
  double m_value = 0.0;
  bool degenerate = false;
};

inline AdviseReport advise(double epsilon, double delta, int ell, int d, double A, double R,
                           double C, double C_prime) {
  if (epsilon <= 0.0 || delta <= 0.0 || d < 1 || ell < 0 || A < 1.0 || R < 1.0 ||
      C <= 0.0 || C_prime <= 0.0)
    throw ConfigError("advise: all inputs must be positive (A, R >= 1)");
  AdviseReport rep;
  const double log_term = std::log(1.0 / delta);
  rep.degenerate = log_term <= 0.0;
  const double eps3 = epsilon * epsilon * epsilon;
  rep.m_ref_value = R * R * std::pow(C * A * d, 2.0 * ell) / eps3 *
                    std::pow(log_term, 4.0 * ell + 1.0);
  rep.m_value = C_prime * R * R *
                std::pow(2.0 * A * (static_cast<double>(d) + 1.0), 2.0 * ell) / eps3 *
                log_term;
  return rep;
}

}  // namespace polyfilter
