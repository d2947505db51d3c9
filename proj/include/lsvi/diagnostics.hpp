#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lsvi/errors.hpp"
#include "lsvi/gram.hpp"
#include "lsvi/harness.hpp"

namespace lsvi {

// Outcome of one analysis check. worst_margin is the smallest slack seen
// before tolerance (negative means the raw inequality was crossed);
// violations carry (episode, stage) pairs, 1-based, capped at 64 entries.
struct CheckResult {
  std::string name;
  bool applicable = true;
  bool pass = false;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::int64_t n_violations = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> violations;
  std::string note;
};

namespace detail {

inline constexpr std::size_t kMaxRecordedViolations = 64;

inline void record_violation(CheckResult& c, std::int64_t episode,
                             std::int64_t stage) {
  ++c.n_violations;
  if (c.violations.size() < kMaxRecordedViolations)
    c.violations.emplace_back(episode, stage);
}

inline CheckResult not_applicable(const char* name, std::string why) {
  CheckResult c;
  c.name = name;
  c.applicable = false;
  c.pass = true;
  c.note = std::move(why);
  return c;
}

}  // namespace detail

// Per-(episode, stage) state reconstructed by replaying the recorded traces
// through fresh Gram states with the run's own configuration. Because the
// replay performs the identical update sequence (same refresh period, same
// order), it reproduces the run's numerics bitwise.
//
//   quad[k-1][h]     = phi_k' (Lambda_h^k)^{-1} phi_k   (pre-update form)
//   log_dets[k-1][h] = log det(Lambda_h^k), with a final row K for the
//                      post-run state
struct ReplayData {
  std::vector<std::vector<double>> quad;
  std::vector<std::vector<double>> log_dets;
};

inline ReplayData replay_grams(const RunReport& report) {
  const int H = report.spec.horizon;
  const std::int64_t K = static_cast<std::int64_t>(report.traces.size());
  std::vector<GramState> grams;
  grams.reserve(H);
  for (int h = 0; h < H; ++h)
    grams.emplace_back(report.spec.dim(), report.config.ridge,
                       report.config.gram_refresh);
  ReplayData data;
  data.quad.assign(K, std::vector<double>(H));
  data.log_dets.assign(K + 1, std::vector<double>(H));
  for (std::int64_t k = 0; k < K; ++k) {
    for (int h = 0; h < H; ++h) {
      const Eigen::VectorXd& phi = report.traces[k].features[h];
      data.log_dets[k][h] = grams[h].log_det();
      data.quad[k][h] = grams[h].quad_form(phi);
      grams[h].update(phi);
    }
  }
  for (int h = 0; h < H; ++h) data.log_dets[K][h] = grams[h].log_det();
  return data;
}

// det(Lambda_h^k) <= (lambda + (k-1)/d)^d, checked in log space with 1e-8
// slack against the run's recorded log-determinants.
inline CheckResult check_det_bound(const RunReport& report) {
  CheckResult c;
  c.name = "det_bound";
  const int d = report.spec.dim();
  const double lambda = report.config.ridge;
  c.pass = true;
  for (std::size_t r = 0; r < report.gram_logdets.size(); ++r) {
    // Row r holds Lambda^{r+1}, which contains r episodes of data.
    const double bound =
        d * std::log(lambda + static_cast<double>(r) / d);
    for (std::size_t h = 0; h < report.gram_logdets[r].size(); ++h) {
      const double margin = bound - report.gram_logdets[r][h];
      c.worst_margin = std::min(c.worst_margin, margin);
      if (margin < -1e-8) {
        c.pass = false;
        detail::record_violation(c, static_cast<std::int64_t>(r) + 1,
                                 static_cast<std::int64_t>(h) + 1);
      }
    }
  }
  return c;
}

// Replayed log-determinants agree with the recorded ones to 1e-8: the
// recorded run can be reconstructed from its traces alone.
inline CheckResult check_replay_fidelity(const RunReport& report,
                                         const ReplayData& replay) {
  CheckResult c;
  c.name = "replay_fidelity";
  c.pass = true;
  if (replay.log_dets.size() != report.gram_logdets.size())
    throw std::invalid_argument(
        "check_replay_fidelity: replay and report disagree on length");
  for (std::size_t r = 0; r < replay.log_dets.size(); ++r) {
    for (std::size_t h = 0; h < replay.log_dets[r].size(); ++h) {
      const double err =
          std::abs(replay.log_dets[r][h] - report.gram_logdets[r][h]);
      c.worst_margin = std::min(c.worst_margin, 1e-8 - err);
      if (err > 1e-8) {
        c.pass = false;
        detail::record_violation(c, static_cast<std::int64_t>(r) + 1,
                                 static_cast<std::int64_t>(h) + 1);
      }
    }
  }
  return c;
}

// Elliptical potential sandwich, per stage:
//
//   L <= sum_k phi_k' (Lambda_h^k)^{-1} phi_k <= 2 L,
//   L = log det(Lambda_h^{K+1}) - log det(Lambda_h^1),
//
// with 1e-6 slack. The upper half needs every quadratic form at most 1, so
// the check applies only when lambda >= 1 (then q <= ||phi||^2 / lambda).
inline CheckResult check_elliptical_potential(const RunReport& report,
                                              const ReplayData& replay) {
  if (report.config.ridge < 1.0)
    return detail::not_applicable(
        "elliptical_potential",
        "requires lambda >= 1 so that the smallest Gram eigenvalue is >= 1");
  CheckResult c;
  c.name = "elliptical_potential";
  c.pass = true;
  const std::int64_t K = static_cast<std::int64_t>(replay.quad.size());
  const int H = report.spec.horizon;
  for (int h = 0; h < H; ++h) {
    double sum = 0.0;
    for (std::int64_t k = 0; k < K; ++k) sum += replay.quad[k][h];
    const double growth = replay.log_dets[K][h] - replay.log_dets[0][h];
    const double margin = std::min(sum - growth, 2.0 * growth - sum);
    c.worst_margin = std::min(c.worst_margin, margin);
    if (margin < -1e-6) {
      c.pass = false;
      detail::record_violation(c, K, h + 1);
    }
  }
  return c;
}

// For SPD A >= B (Loewner order), every x satisfies
//
//   ||x||_A <= ||x||_B * sqrt(det A / det B),   ||x||_M = sqrt(x' M x),
//
// within 1e-10 relative. An eigenvalue of A - B below -1e-10 fails the
// precondition and raises PreconditionError instead of reporting a result.
inline CheckResult check_norm_ratio(const Eigen::MatrixXd& A,
                                    const Eigen::MatrixXd& B,
                                    const std::vector<Eigen::VectorXd>& xs) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw std::invalid_argument(
        "check_norm_ratio: matrices must be square and equally sized");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diff(A - B,
                                                      Eigen::EigenvaluesOnly);
  if (diff.eigenvalues().minCoeff() < -1e-10)
    throw PreconditionError(
        "check_norm_ratio: A - B has eigenvalue " +
        std::to_string(diff.eigenvalues().minCoeff()) + " below -1e-10");
  Eigen::LLT<Eigen::MatrixXd> lltA(A), lltB(B);
  if (lltA.info() != Eigen::Success || lltB.info() != Eigen::Success)
    throw std::invalid_argument("check_norm_ratio: inputs must be SPD");
  const double log_ratio =
      lltA.matrixLLT().diagonal().array().log().sum() -
      lltB.matrixLLT().diagonal().array().log().sum();
  const double det_factor = std::exp(log_ratio);  // sqrt(det A / det B)

  CheckResult c;
  c.name = "norm_ratio";
  c.pass = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lhs = std::sqrt(std::max(0.0, xs[i].dot(A * xs[i])));
    const double rhs =
        std::sqrt(std::max(0.0, xs[i].dot(B * xs[i]))) * det_factor;
    const double margin = rhs * (1.0 + 1e-10) - lhs;
    c.worst_margin = std::min(c.worst_margin, margin);
    if (margin < 0.0) {
      c.pass = false;
      detail::record_violation(c, static_cast<std::int64_t>(i) + 1, 0);
    }
  }
  return c;
}

// Bad-index set of a batched run: pairs (k,h) where the stale bonus exceeds
// twice the fresh one,
//
//   C = {(k,h) : Gamma^{b_k}(phi) / Gamma^k(phi) > 2},
//   |C| <= d H K log(K/d + 1) / (2 B log 2).
//
// Fresh bonuses come from the replay, stale ones from the recorded fit
// snapshots. Zero fresh bonus (zero feature) cannot produce a bad index.
struct BadIndexResult {
  std::int64_t count = 0;
  double bound = 0.0;
  CheckResult check;
};

inline BadIndexResult count_bad_indices(const RunReport& report,
                                        const ReplayData& replay) {
  if (report.config.scheduler.kind != SchedulerKind::kUniformBatch)
    throw std::invalid_argument(
        "count_bad_indices: requires a batch-scheduled run");
  const int d = report.spec.dim();
  const int H = report.spec.horizon;
  const std::int64_t K = static_cast<std::int64_t>(report.traces.size());
  const std::int64_t B = *report.config.scheduler.budget;

  BadIndexResult out;
  out.bound = static_cast<double>(d) * H * K *
              std::log(static_cast<double>(K) / d + 1.0) /
              (2.0 * static_cast<double>(B) * std::log(2.0));
  out.check.name = "bad_index_count";
  std::size_t snap_idx = 0;
  for (std::int64_t k = 0; k < K; ++k) {
    const std::int64_t bk = report.per_episode[k].fit_episode;
    while (snap_idx + 1 < report.snapshots.size() &&
           report.snapshots[snap_idx + 1].episode <= k + 1)
      ++snap_idx;
    if (report.snapshots[snap_idx].episode != bk)
      throw std::invalid_argument(
          "count_bad_indices: snapshot records do not cover episode " +
          std::to_string(k + 1));
    const QSnapshot& snap = report.snapshots[snap_idx].snapshot;
    for (int h = 0; h < H; ++h) {
      const Eigen::VectorXd& phi = report.traces[k].features[h];
      const double fresh = std::sqrt(std::max(0.0, replay.quad[k][h]));
      if (fresh == 0.0) continue;
      const double stale = std::sqrt(
          std::max(0.0, phi.dot(snap.stage(h).gram_inv * phi)));
      if (stale / fresh > 2.0) {
        ++out.count;
        detail::record_violation(out.check, k + 1, h + 1);
      }
    }
  }
  // record_violation counted members of C; C is allowed to be nonempty, the
  // assertion is only on its size.
  out.check.n_violations = 0;
  out.check.worst_margin = out.bound - static_cast<double>(out.count);
  out.check.pass = static_cast<double>(out.count) <= out.bound;
  if (!out.check.pass) out.check.n_violations = 1;
  out.check.note = "|C| = " + std::to_string(out.count) +
                   ", bound = " + std::to_string(out.bound);
  return out;
}

// Stale-to-fresh bonus ratio of a det-switch run, at every (k,h):
//
//   Gamma^{b_k} / Gamma^k <= sqrt(det Lambda^k / det Lambda^{b_k})
//                         <= sqrt(eta),
//
// each step within relative slack 1e-8. The determinant ratio uses the
// replayed log-det at k and the frozen log-det of the acting snapshot.
inline CheckResult check_bonus_ratio(const RunReport& report,
                                     const ReplayData& replay, double eta) {
  if (report.config.scheduler.kind != SchedulerKind::kDetSwitch)
    throw std::invalid_argument(
        "check_bonus_ratio: requires a det-switch run");
  if (!(eta > 1.0))
    throw std::invalid_argument("check_bonus_ratio: eta must exceed 1");
  CheckResult c;
  c.name = "bonus_ratio";
  c.pass = true;
  const std::int64_t K = static_cast<std::int64_t>(report.traces.size());
  const int H = report.spec.horizon;
  const double sqrt_eta = std::sqrt(eta);
  std::size_t snap_idx = 0;
  for (std::int64_t k = 0; k < K; ++k) {
    const std::int64_t bk = report.per_episode[k].fit_episode;
    while (snap_idx + 1 < report.snapshots.size() &&
           report.snapshots[snap_idx + 1].episode <= k + 1)
      ++snap_idx;
    if (report.snapshots[snap_idx].episode != bk)
      throw std::invalid_argument(
          "check_bonus_ratio: snapshot records do not cover episode " +
          std::to_string(k + 1));
    const QSnapshot& snap = report.snapshots[snap_idx].snapshot;
    for (int h = 0; h < H; ++h) {
      const Eigen::VectorXd& phi = report.traces[k].features[h];
      const double fresh = std::sqrt(std::max(0.0, replay.quad[k][h]));
      if (fresh == 0.0) continue;
      const double stale = std::sqrt(
          std::max(0.0, phi.dot(snap.stage(h).gram_inv * phi)));
      const double ratio = stale / fresh;
      const double det_form = std::exp(
          0.5 * (replay.log_dets[k][h] - snap.stage(h).gram_log_det));
      const double margin =
          std::min({det_form * (1.0 + 1e-8) - ratio,
                    sqrt_eta * (1.0 + 1e-8) - det_form,
                    sqrt_eta * (1.0 + 2e-8) - ratio});
      c.worst_margin = std::min(c.worst_margin, margin);
      if (margin < 0.0) {
        c.pass = false;
        detail::record_violation(c, k + 1, h + 1);
      }
    }
  }
  return c;
}

inline CheckResult check_bonus_ratio(const RunReport& report,
                                     const ReplayData& replay) {
  if (!report.eta)
    throw std::invalid_argument("check_bonus_ratio: run has no eta");
  return check_bonus_ratio(report, replay, *report.eta);
}

// Optimism of the fitted Q against the exact Q*: fraction of
// (snapshot, stage, state, action) tuples with Q >= Q* - 1e-8, compared to
// the 1 - delta target. Violations are expected on a delta-sized share of
// runs; pass reflects the fraction threshold only.
struct OptimismResult {
  double fraction = 0.0;
  double threshold = 0.0;
  CheckResult check;
};

inline OptimismResult check_optimism(const RunReport& report) {
  const ValueTables opt = optimal_values(report.spec);
  const int S = report.spec.states(), A = report.spec.actions();
  const int H = report.spec.horizon;
  OptimismResult out;
  out.threshold = 1.0 - report.config.delta;
  out.check.name = "optimism";
  std::int64_t total = 0, good = 0;
  for (const SnapshotRecord& rec : report.snapshots) {
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const double q =
              rec.snapshot.q_value(h, report.spec.features.phi(s, a));
          const double margin = q - opt.q[h](s, a);
          out.check.worst_margin = std::min(out.check.worst_margin, margin);
          ++total;
          if (margin >= -1e-8) {
            ++good;
          } else {
            detail::record_violation(out.check, rec.episode, h + 1);
          }
        }
      }
    }
  }
  out.fraction = total == 0 ? 1.0 : static_cast<double>(good) / total;
  out.check.pass = out.fraction >= out.threshold;
  out.check.note = "fraction = " + std::to_string(out.fraction) +
                   ", target = " + std::to_string(out.threshold);
  return out;
}

// Exact policy-change count: adjacent refits whose greedy tables differ
// anywhere. Gives the honest number of policy switches, next to the refit
// count the schedulers bound.
inline std::int64_t exact_policy_switch_count(const RunReport& report) {
  std::int64_t count = 0;
  for (std::size_t i = 1; i < report.snapshots.size(); ++i)
    if (report.snapshots[i].policy != report.snapshots[i - 1].policy) ++count;
  return count;
}

struct DiagnosticsReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const CheckResult& c : checks)
      if (c.applicable && !c.pass) return false;
    return true;
  }
};

// Full battery with applicability routing: scheduler-specific checks are
// reported as not-applicable rather than dropped, so the report shape does
// not depend on the run.
inline DiagnosticsReport run_all_checks(const RunReport& report) {
  if (!report.valid)
    throw std::invalid_argument(
        "run_all_checks: report is flagged invalid (" + report.failure + ")");
  if (report.traces.empty())
    throw std::invalid_argument("run_all_checks: report has no traces");
  const ReplayData replay = replay_grams(report);
  DiagnosticsReport out;
  out.checks.push_back(check_det_bound(report));
  out.checks.push_back(check_replay_fidelity(report, replay));
  out.checks.push_back(check_elliptical_potential(report, replay));
  if (report.config.scheduler.kind == SchedulerKind::kUniformBatch)
    out.checks.push_back(count_bad_indices(report, replay).check);
  else
    out.checks.push_back(detail::not_applicable(
        "bad_index_count", "defined for the batch scheduler"));
  if (report.config.scheduler.kind == SchedulerKind::kDetSwitch)
    out.checks.push_back(check_bonus_ratio(report, replay));
  else
    out.checks.push_back(detail::not_applicable(
        "bonus_ratio", "defined for the det-switch scheduler"));
  out.checks.push_back(check_optimism(report).check);
  return out;
}

}  // namespace lsvi
