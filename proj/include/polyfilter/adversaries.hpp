#pragma once

// Executable contamination strategies: generic attacks plus the exact
// constructions from the lower-bound arguments, and brute-force opt_total
// oracles for small instances.
//
// BC strategies replace exactly floor(eta*M) samples; HC strategies only add
// points and preserve the clean samples verbatim.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyfilter/dist.hpp"
#include "polyfilter/rng.hpp"

namespace polyfilter {

enum class BCKind { label_flip, far_outlier_flip, boundary_attack };

struct BCStrategy {
  BCKind kind = BCKind::label_flip;
  double eta = 0.0;            // contamination rate in [0,1)
  double outlier_scale = 1e3;  // far_outlier_flip: replacement distance is scale*sqrt(d)
  double margin = 0.1;         // boundary_attack: width of the band around the separator
};

enum class HCKind { consistent_cluster, duplicate_flip, constant_vs_flipped, balanced_flip };

struct HCStrategy {
  HCKind kind = HCKind::duplicate_flip;
  double Q = 2.0;               // total blow-up ratio >= 1
  double spike_factor = 10.0;   // consistent_cluster: spike at factor*sqrt(d) along e1
};

// Substitutes floor(eta*M) clean samples with adversarial ones. The ground
// truth concept is needed so replacements can contradict it.
inline TaggedDataset contaminate_bc(const TaggedDataset& clean, const BCStrategy& strat,
                                    std::uint64_t seed, const Concept& target) {
  if (!(strat.eta >= 0.0 && strat.eta < 1.0))
    throw std::invalid_argument("contaminate_bc: eta must be in [0,1)");
  for (Tag t : clean.tags)
    if (t != Tag::clean) throw std::invalid_argument("contaminate_bc: input must be clean");
  const std::size_t M = clean.size();
  TaggedDataset out = clean;
  const std::size_t k = static_cast<std::size_t>(std::floor(strat.eta * static_cast<double>(M)));
  if (k == 0) return out;

  Rng rng(seed);
  // seeded choice of k distinct indices (partial Fisher-Yates)
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i)
    std::swap(perm[i], perm[i + rng.next_below(M - i)]);
  perm.resize(k);

  const int d = static_cast<int>(clean.xs.cols());
  switch (strat.kind) {
    case BCKind::label_flip: {
      for (std::size_t idx : perm) {
        out.ys[static_cast<Eigen::Index>(idx)] = -out.ys[static_cast<Eigen::Index>(idx)];
        out.tags[idx] = Tag::adversarial;
      }
      break;
    }
    case BCKind::far_outlier_flip: {
      // one seeded direction per replacement: the plants jointly pin every
      // coefficient direction of an unfiltered regression
      for (std::size_t idx : perm) {
        Eigen::VectorXd dir(d);
        for (int i = 0; i < d; ++i) dir[i] = rng.next_gaussian();
        if (dir.norm() == 0.0) dir[0] = 1.0;
        dir.normalize();
        const Eigen::VectorXd z =
            strat.outlier_scale * std::sqrt(static_cast<double>(d)) * dir;
        out.xs.row(static_cast<Eigen::Index>(idx)) = z.transpose();
        out.ys[static_cast<Eigen::Index>(idx)] = -target(z);
        out.tags[idx] = Tag::adversarial;
      }
      break;
    }
    case BCKind::boundary_attack: {
      if (target.kind != ConceptKind::halfspace)
        throw std::invalid_argument("contaminate_bc: boundary_attack needs a halfspace concept");
      const Eigen::VectorXd& w = target.weights[0];
      const double theta = target.offsets[0];
      const double w2 = w.squaredNorm();
      if (w2 == 0.0)
        throw std::invalid_argument("contaminate_bc: boundary_attack needs a nonzero weight");
      for (std::size_t idx : perm) {
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) x[i] = rng.next_gaussian();
        const double band_pos = theta + strat.margin * rng.next_uniform(-1.0, 1.0);
        x += ((band_pos - w.dot(x)) / w2) * w;
        out.xs.row(static_cast<Eigen::Index>(idx)) = x.transpose();
        out.ys[static_cast<Eigen::Index>(idx)] = -target(x);
        out.tags[idx] = Tag::adversarial;
      }
      break;
    }
  }
  return out;
}

namespace detail {

inline void append_sample(TaggedDataset& data, const Eigen::VectorXd& x, double y, Tag tag) {
  const Eigen::Index n = data.xs.rows();
  data.xs.conservativeResize(n + 1, Eigen::NoChange);
  data.ys.conservativeResize(n + 1);
  data.xs.row(n) = x.transpose();
  data.ys[n] = y;
  data.tags.push_back(tag);
}

}  // namespace detail

// Adds up to (Q-1)*m adversarial samples; the clean subsequence is preserved
// verbatim, order included. duplicate_flip is the one exception to plain
// appending: each clean sample is emitted next to its flipped twin in a
// label-canonical order (+1 first), which makes the learner-visible output
// bit-identical for ground truths f* and -f*.
inline TaggedDataset contaminate_hc(const TaggedDataset& clean, const HCStrategy& strat,
                                    std::uint64_t seed, const TargetDistribution& dist,
                                    const Concept& target) {
  if (strat.Q < 1.0) throw std::invalid_argument("contaminate_hc: Q must be >= 1");
  for (Tag t : clean.tags)
    if (t != Tag::clean) throw std::invalid_argument("contaminate_hc: input must be clean");
  const std::size_t m = clean.size();
  const int d = static_cast<int>(clean.xs.cols());
  const std::size_t M_target =
      static_cast<std::size_t>(std::floor(strat.Q * static_cast<double>(m)));

  switch (strat.kind) {
    case HCKind::consistent_cluster: {
      if (dist.kind != DistKind::gaussian)
        throw std::invalid_argument(
            "contaminate_hc: consistent_cluster needs a real-valued marginal");
      TaggedDataset out = clean;
      const std::size_t n_add = M_target - m;
      Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
      center[0] = strat.spike_factor * std::sqrt(static_cast<double>(d));
      Rng rng(seed);
      for (std::size_t i = 0; i < n_add; ++i) {
        Eigen::VectorXd x = center;
        for (int c = 0; c < d; ++c) x[c] += rng.next_gaussian();
        detail::append_sample(out, x, target(x), Tag::adversarial);
      }
      return out;
    }
    case HCKind::duplicate_flip: {
      if (strat.Q < 2.0)
        throw std::invalid_argument("contaminate_hc: duplicate_flip needs Q >= 2");
      TaggedDataset out;
      out.xs.resize(static_cast<Eigen::Index>(2 * m), d);
      out.ys.resize(static_cast<Eigen::Index>(2 * m));
      out.tags.resize(2 * m);
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index a = static_cast<Eigen::Index>(2 * i);
        const double y = clean.ys[static_cast<Eigen::Index>(i)];
        out.xs.row(a) = clean.xs.row(static_cast<Eigen::Index>(i));
        out.xs.row(a + 1) = clean.xs.row(static_cast<Eigen::Index>(i));
        out.ys[a] = 1.0;
        out.ys[a + 1] = -1.0;
        out.tags[2 * i] = (y == 1.0) ? Tag::clean : Tag::adversarial;
        out.tags[2 * i + 1] = (y == -1.0) ? Tag::clean : Tag::adversarial;
      }
      return out;
    }
    case HCKind::constant_vs_flipped: {
      if (target.kind != ConceptKind::constant)
        throw std::invalid_argument(
            "contaminate_hc: constant_vs_flipped needs a constant concept");
      if (strat.Q < 2.0)
        throw std::invalid_argument("contaminate_hc: constant_vs_flipped needs Q >= 2");
      TaggedDataset out = clean;
      const Eigen::MatrixXd fresh = sample_unlabeled(dist, m, seed);
      for (std::size_t i = 0; i < m; ++i)
        detail::append_sample(out, fresh.row(static_cast<Eigen::Index>(i)).transpose(),
                              -target.constant_sign, Tag::adversarial);
      return out;
    }
    case HCKind::balanced_flip: {
      if (strat.Q < 2.0)
        throw std::invalid_argument("contaminate_hc: balanced_flip needs Q >= 2");
      std::size_t m1 = 0;
      for (std::size_t i = 0; i < m; ++i)
        if (clean.ys[static_cast<Eigen::Index>(i)] ==
            target(clean.xs.row(static_cast<Eigen::Index>(i)).transpose()))
          ++m1;
      const std::size_t m2 = m - m1;
      TaggedDataset out = clean;
      Rng rng(seed);
      auto add_labeled_by = [&](std::size_t count, double flip) {
        for (std::size_t i = 0; i < count; ++i) {
          Eigen::VectorXd x(d);
          for (int c = 0; c < d; ++c)
            x[c] = dist.kind == DistKind::gaussian ? rng.next_gaussian() : rng.next_sign();
          detail::append_sample(out, x, flip * target(x), Tag::adversarial);
        }
      };
      if (m1 >= m2) {
        add_labeled_by(M_target - m, -1.0);
      } else {
        add_labeled_by(m2 - m1, 1.0);
        add_labeled_by(M_target - 2 * m2, -1.0);
      }
      return out;
    }
  }
  throw std::logic_error("contaminate_hc: unknown strategy");
}

enum class OptClass { halfspaces_2d, constants, all_functions_on_observed_points };

namespace detail {

// Classifiers enumerated for the 2-d halfspace oracle: every separator
// through a pair of sample points, both orientations, tiny rotations of the
// pair directions, axis directions, all thresholds along each direction, and
// the two constants. Exact for small inputs; cross-checked against the
// angular sweep below.
inline std::size_t best_direction_errors(const std::vector<double>& proj,
                                         const Eigen::VectorXd& ys) {
  const std::size_t n = proj.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });
  // classifier: +1 iff proj >= theta; theta scans the sorted projections and
  // one value above the maximum
  std::size_t total_pos = 0;
  for (Eigen::Index i = 0; i < ys.size(); ++i)
    if (ys[i] == 1.0) ++total_pos;
  const std::size_t total_neg = n - total_pos;
  std::size_t best = total_neg;  // theta <= min: everything predicted +1
  std::size_t pos_below = 0, neg_below = 0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t k2 = k;
    while (k2 < n && proj[order[k2]] == proj[order[k]]) ++k2;
    for (std::size_t j = k; j < k2; ++j)
      (ys[static_cast<Eigen::Index>(order[j])] == 1.0 ? pos_below : neg_below) += 1;
    // theta just above this group: below predicted -1, rest +1
    const std::size_t err = pos_below + (total_neg - neg_below);
    best = std::min(best, err);
    k = k2;
  }
  return best;
}

inline double opt_halfspaces_2d_pairscan(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys) {
  const std::size_t n = static_cast<std::size_t>(xs.rows());
  std::size_t total_pos = 0;
  for (Eigen::Index i = 0; i < ys.size(); ++i)
    if (ys[i] == 1.0) ++total_pos;
  std::size_t best = std::min(total_pos, n - total_pos);  // constants
  std::vector<Eigen::Vector2d> dirs;
  dirs.emplace_back(1.0, 0.0);
  dirs.emplace_back(0.0, 1.0);
  const double rot = 1e-6;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xs(static_cast<Eigen::Index>(j), 0) - xs(static_cast<Eigen::Index>(i), 0);
      const double dy = xs(static_cast<Eigen::Index>(j), 1) - xs(static_cast<Eigen::Index>(i), 1);
      if (dx == 0.0 && dy == 0.0) continue;
      const Eigen::Vector2d normal(-dy, dx);
      dirs.push_back(normal);
      dirs.emplace_back(normal[0] - rot * normal[1], normal[1] + rot * normal[0]);
      dirs.emplace_back(normal[0] + rot * normal[1], normal[1] - rot * normal[0]);
    }
  std::vector<double> proj(n);
  for (const Eigen::Vector2d& dir : dirs) {
    for (int orient = 0; orient < 2; ++orient) {
      const Eigen::Vector2d d = orient == 0 ? dir : Eigen::Vector2d(-dir);
      for (std::size_t k = 0; k < n; ++k)
        proj[k] = d[0] * xs(static_cast<Eigen::Index>(k), 0) +
                  d[1] * xs(static_cast<Eigen::Index>(k), 1);
      best = std::min(best, best_direction_errors(proj, ys));
      if (best == 0) return 0.0;
    }
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

// Angular sweep around each pivot; enumerates the same classifier family as
// the pair scan in O(n^2 log n).
inline double opt_halfspaces_2d_sweep(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys) {
  const std::size_t n = static_cast<std::size_t>(xs.rows());
  std::size_t total_pos = 0;
  for (Eigen::Index i = 0; i < ys.size(); ++i)
    if (ys[i] == 1.0) ++total_pos;
  std::size_t best = std::min(total_pos, n - total_pos);  // constants

  struct Event {
    double wx, wy;   // canonical direction in the upper half-plane
    int idx;
    int side;        // current side, +1/-1
  };
  std::vector<Event> events;
  events.reserve(n);

  for (std::size_t piv = 0; piv < n && best > 0; ++piv) {
    const double px = xs(static_cast<Eigen::Index>(piv), 0);
    const double py = xs(static_cast<Eigen::Index>(piv), 1);
    std::size_t grp_pos = ys[static_cast<Eigen::Index>(piv)] == 1.0 ? 1 : 0;
    std::size_t grp_neg = 1 - grp_pos;
    events.clear();
    // counts over points strictly off the pivot, keyed by (side, label)
    std::size_t P1 = 0, P0 = 0, M1 = 0, M0 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == piv) continue;
      const double dx = xs(static_cast<Eigen::Index>(j), 0) - px;
      const double dy = xs(static_cast<Eigen::Index>(j), 1) - py;
      const bool pos_label = ys[static_cast<Eigen::Index>(j)] == 1.0;
      if (dx == 0.0 && dy == 0.0) {
        // coincident with the pivot: on-line for every line through it
        (pos_label ? grp_pos : grp_neg) += 1;
        continue;
      }
      Event e;
      const bool upper = dy > 0.0 || (dy == 0.0 && dx > 0.0);
      e.wx = upper ? dx : -dx;
      e.wy = upper ? dy : -dy;
      e.idx = static_cast<int>(j);
      e.side = upper ? 1 : -1;  // side just below angle 0
      (e.side == 1 ? (pos_label ? P1 : P0) : (pos_label ? M1 : M0)) += 1;
      events.push_back(e);
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return a.wx * b.wy - a.wy * b.wx > 0.0;
    });

    auto interval_best = [&]() {
      const std::size_t errA = P0 + M1;  // predict side sign; on-line -> +1
      const std::size_t errB = P1 + M0;
      return std::min(std::min(errA + grp_neg, errA + grp_pos),
                      std::min(errB + grp_neg, errB + grp_pos));
    };
    best = std::min(best, interval_best());

    std::size_t g = 0;
    while (g < events.size() && best > 0) {
      std::size_t g2 = g;
      while (g2 < events.size() &&
             events[g].wx * events[g2].wy - events[g].wy * events[g2].wx == 0.0)
        ++g2;
      // the separator through pivot and this event group
      std::size_t ev_pos = 0, ev_neg = 0;
      for (std::size_t k = g; k < g2; ++k) {
        const bool pos_label = ys[events[k].idx] == 1.0;
        (pos_label ? ev_pos : ev_neg) += 1;
        (events[k].side == 1 ? (pos_label ? P1 : P0) : (pos_label ? M1 : M0)) -= 1;
      }
      const std::size_t on_line_err = ev_neg + grp_neg;  // event and pivot points -> +1
      best = std::min(best, std::min(P0 + M1 + on_line_err, P1 + M0 + on_line_err));
      for (std::size_t k = g; k < g2; ++k) {
        events[k].side = -events[k].side;
        const bool pos_label = ys[events[k].idx] == 1.0;
        (events[k].side == 1 ? (pos_label ? P1 : P0) : (pos_label ? M1 : M0)) += 1;
      }
      best = std::min(best, interval_best());
      g = g2;
    }
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

}  // namespace detail

// Minimum empirical misclassification of the class over the labeled set.
inline double opt_total_oracle(const LabeledSet& data, OptClass cls) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("opt_total_oracle: empty input");
  switch (cls) {
    case OptClass::constants: {
      std::size_t pos = 0;
      for (Eigen::Index i = 0; i < data.ys.size(); ++i)
        if (data.ys[i] == 1.0) ++pos;
      return static_cast<double>(std::min(pos, n - pos)) / static_cast<double>(n);
    }
    case OptClass::all_functions_on_observed_points: {
      std::map<std::string, std::pair<std::size_t, std::size_t>> groups;
      for (std::size_t i = 0; i < n; ++i) {
        std::string key;
        key.reserve(static_cast<std::size_t>(data.xs.cols()));
        for (Eigen::Index c = 0; c < data.xs.cols(); ++c) {
          const double v = data.xs(static_cast<Eigen::Index>(i), c);
          if (v != 1.0 && v != -1.0)
            throw std::invalid_argument(
                "opt_total_oracle: all_functions needs hypercube points");
          key.push_back(v == 1.0 ? '1' : '0');
        }
        auto& g = groups[key];
        (data.ys[static_cast<Eigen::Index>(i)] == 1.0 ? g.first : g.second) += 1;
      }
      std::size_t conflicts = 0;
      for (const auto& [key, g] : groups) conflicts += std::min(g.first, g.second);
      return static_cast<double>(conflicts) / static_cast<double>(n);
    }
    case OptClass::halfspaces_2d: {
      if (data.xs.cols() != 2)
        throw std::invalid_argument("opt_total_oracle: halfspaces_2d needs d = 2");
      if (n > 2000)
        throw std::invalid_argument("opt_total_oracle: halfspaces_2d limited to 2000 samples");
      return detail::opt_halfspaces_2d_sweep(data.xs, data.ys);
    }
  }
  throw std::logic_error("opt_total_oracle: unknown class");
}

// true iff no pair of points is coordinatewise comparable
inline bool no_comparable_pair(const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  const Eigen::Index n = xs.rows();
  const Eigen::Index d = xs.cols();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      bool le = true, ge = true;
      for (Eigen::Index c = 0; c < d && (le || ge); ++c) {
        const double a = xs(i, c), b = xs(j, c);
        if (a > b) le = false;
        if (a < b) ge = false;
      }
      if (le || ge) return false;
    }
  return true;
}

}  // namespace polyfilter
