#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lsvi/adaptivity.hpp"
#include "lsvi/gram.hpp"
#include "lsvi/linear_mdp.hpp"
#include "lsvi/lsvi.hpp"
#include "lsvi/rng.hpp"

namespace lsvi {

enum class SchedulerKind { kFull, kUniformBatch, kDetSwitch };

inline const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kFull: return "full";
    case SchedulerKind::kUniformBatch: return "batch";
    case SchedulerKind::kDetSwitch: return "det_switch";
  }
  throw std::invalid_argument("to_string: unknown scheduler kind");
}

inline SchedulerKind scheduler_kind_from_string(const std::string& s) {
  if (s == "full") return SchedulerKind::kFull;
  if (s == "batch") return SchedulerKind::kUniformBatch;
  if (s == "det_switch") return SchedulerKind::kDetSwitch;
  throw std::invalid_argument("scheduler: '" + s +
                              "' is not one of full, batch, det_switch");
}

// batch requires budget; det_switch takes exactly one of budget (eta is then
// derived) or an explicit eta > 1; full takes neither.
struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::kFull;
  std::optional<std::int64_t> budget;
  std::optional<double> eta;
};

struct GeneratorParams {
  int dim = 0;
  int states = 0;
  int actions = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
};

// Everything needed to reproduce a run. Exactly one of spec / generator must
// be set.
struct RunConfig {
  std::optional<LinearMdp> spec;
  std::optional<GeneratorParams> generator;
  std::int64_t episodes = 0;
  SchedulerConfig scheduler;
  double ridge = 1.0;
  double delta = 0.01;
  double bonus_scale = 1.0;
  std::uint64_t seed = 0;
  int gram_refresh = kDefaultRefreshPeriod;
};

inline void validate_config(const RunConfig& cfg) {
  if (cfg.spec.has_value() == cfg.generator.has_value())
    throw std::invalid_argument(
        "config: exactly one of spec and generator must be given");
  if (cfg.generator) {
    const GeneratorParams& g = *cfg.generator;
    if (g.dim < 2) throw std::invalid_argument("generator.dim: must be >= 2");
    if (g.states < 1 || g.actions < 1 || g.horizon < 1)
      throw std::invalid_argument(
          "generator: states, actions, horizon must be >= 1");
  }
  if (cfg.episodes < 1)
    throw std::invalid_argument("episodes: must be >= 1");
  if (!(cfg.ridge > 0.0))
    throw std::invalid_argument("lambda: must be > 0");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    throw std::invalid_argument("delta: must lie in (0,1)");
  if (!(cfg.bonus_scale >= 0.0))
    throw std::invalid_argument("bonus_scale: must be >= 0");
  if (cfg.gram_refresh < 1)
    throw std::invalid_argument("gram_refresh: must be >= 1");
  switch (cfg.scheduler.kind) {
    case SchedulerKind::kFull:
      if (cfg.scheduler.budget || cfg.scheduler.eta)
        throw std::invalid_argument(
            "scheduler: full takes neither budget nor eta");
      break;
    case SchedulerKind::kUniformBatch:
      if (!cfg.scheduler.budget)
        throw std::invalid_argument("scheduler: batch requires a budget");
      if (*cfg.scheduler.budget < 1)
        throw std::invalid_argument("budget: must be >= 1");
      if (cfg.scheduler.eta)
        throw std::invalid_argument("scheduler: batch does not take eta");
      break;
    case SchedulerKind::kDetSwitch:
      if (cfg.scheduler.budget.has_value() == cfg.scheduler.eta.has_value())
        throw std::invalid_argument(
            "scheduler: det_switch takes exactly one of budget and eta");
      if (cfg.scheduler.budget && *cfg.scheduler.budget < 1)
        throw std::invalid_argument("budget: must be >= 1");
      if (cfg.scheduler.eta && !(*cfg.scheduler.eta > 1.0))
        throw std::invalid_argument("eta: must exceed 1");
      break;
  }
}

inline LinearMdp resolve_spec(const RunConfig& cfg) {
  LinearMdp spec = cfg.spec ? *cfg.spec
                            : make_random_mdp(cfg.generator->dim,
                                              cfg.generator->states,
                                              cfg.generator->actions,
                                              cfg.generator->horizon,
                                              cfg.generator->seed);
  validate(spec);
  return spec;
}

struct EpisodeRow {
  std::int64_t episode = 0;      // k, 1-based
  std::int64_t fit_episode = 0;  // b_k: episode whose snapshot acted in k
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  std::int64_t switches_so_far = 0;
  double realized_return = 0.0;
};

// One refit: the snapshot, its greedy policy, and that policy's exact value
// table (from dynamic programming, not rollouts).
struct SnapshotRecord {
  std::int64_t episode = 0;
  QSnapshot snapshot;
  std::vector<std::vector<int>> policy;
  Eigen::MatrixXd policy_v;  // (H+1) x S
};

struct RunTiming {
  double fit_seconds = 0.0;
  double act_seconds = 0.0;
  double oracle_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunReport {
  RunConfig config;  // as resolved for the run
  LinearMdp spec;    // instance actually played
  double beta = 0.0;
  std::optional<double> eta;      // det_switch only
  std::optional<BatchGrid> grid;  // batch only
  std::vector<EpisodeRow> per_episode;
  std::vector<std::int64_t> switch_episodes;
  std::int64_t n_switches = 0;
  std::vector<EpisodeTrace> traces;
  // Row k-1 holds the per-stage log det(Lambda_h^k) (data through episode
  // k-1); the final row is the post-run state. (K+1) x H.
  std::vector<std::vector<double>> gram_logdets;
  std::vector<SnapshotRecord> snapshots;
  RunTiming timing;
  bool valid = true;
  std::string failure;

  double total_regret() const {
    return per_episode.empty() ? 0.0 : per_episode.back().cum_regret;
  }
};

namespace detail {

template <typename Derived>
bool same_bits(const Eigen::MatrixBase<Derived>& a,
               const Eigen::MatrixBase<Derived>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

}  // namespace detail

// Field-by-field equality of run payloads, excluding wall-clock timing and
// the config echo (two configs may legitimately describe the same dynamics,
// e.g. full versus batch with B = K). Exact floating-point comparison: used
// to certify that two runs performed identical arithmetic. On mismatch the
// first differing field is written to *why when provided.
inline bool reports_bitwise_equal(const RunReport& a, const RunReport& b,
                                  std::string* why = nullptr) {
  const auto fail = [why](const std::string& what) {
    if (why) *why = what;
    return false;
  };
  if (a.beta != b.beta) return fail("beta");
  if (a.valid != b.valid || a.failure != b.failure) return fail("valid");
  if (a.n_switches != b.n_switches) return fail("n_switches");
  if (a.switch_episodes != b.switch_episodes) return fail("switch_episodes");
  if (a.gram_logdets != b.gram_logdets) return fail("gram_logdets");
  if (a.per_episode.size() != b.per_episode.size())
    return fail("per_episode.size");
  for (std::size_t i = 0; i < a.per_episode.size(); ++i) {
    const EpisodeRow &x = a.per_episode[i], &y = b.per_episode[i];
    if (x.episode != y.episode || x.fit_episode != y.fit_episode ||
        x.inst_regret != y.inst_regret || x.cum_regret != y.cum_regret ||
        x.switches_so_far != y.switches_so_far ||
        x.realized_return != y.realized_return)
      return fail("per_episode[" + std::to_string(i) + "]");
  }
  if (a.traces.size() != b.traces.size()) return fail("traces.size");
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    const EpisodeTrace &x = a.traces[i], &y = b.traces[i];
    if (x.states != y.states || x.actions != y.actions ||
        x.rewards != y.rewards)
      return fail("traces[" + std::to_string(i) + "]");
    if (x.features.size() != y.features.size())
      return fail("traces[" + std::to_string(i) + "].features");
    for (std::size_t h = 0; h < x.features.size(); ++h)
      if (!detail::same_bits(x.features[h], y.features[h]))
        return fail("traces[" + std::to_string(i) + "].features");
  }
  if (a.snapshots.size() != b.snapshots.size()) return fail("snapshots.size");
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    const SnapshotRecord &x = a.snapshots[i], &y = b.snapshots[i];
    if (x.episode != y.episode || x.policy != y.policy)
      return fail("snapshots[" + std::to_string(i) + "]");
    if (!detail::same_bits(x.policy_v, y.policy_v))
      return fail("snapshots[" + std::to_string(i) + "].policy_v");
    if (x.snapshot.horizon() != y.snapshot.horizon() ||
        x.snapshot.beta() != y.snapshot.beta() ||
        x.snapshot.fit_episode() != y.snapshot.fit_episode())
      return fail("snapshots[" + std::to_string(i) + "].snapshot");
    for (int h = 0; h < x.snapshot.horizon(); ++h) {
      const StageFit &sx = x.snapshot.stage(h), &sy = y.snapshot.stage(h);
      if (!detail::same_bits(sx.weights, sy.weights) ||
          !detail::same_bits(sx.gram_inv, sy.gram_inv) ||
          sx.gram_log_det != sy.gram_log_det)
        return fail("snapshots[" + std::to_string(i) + "].stage(" +
                    std::to_string(h) + ")");
    }
  }
  return true;
}

// Plays one episode greedily against a frozen snapshot. The caller supplies
// the start state and the episode's random stream.
inline EpisodeTrace run_episode(const LinearMdp& spec, const QSnapshot& snap,
                                int initial_state, RandomStream& rng) {
  if (snap.horizon() != spec.horizon)
    throw std::invalid_argument("run_episode: snapshot horizon mismatch");
  EpisodeTrace trace;
  trace.states.reserve(spec.horizon + 1);
  trace.actions.reserve(spec.horizon);
  trace.rewards.reserve(spec.horizon);
  trace.features.reserve(spec.horizon);
  int s = initial_state;
  trace.states.push_back(s);
  for (int h = 0; h < spec.horizon; ++h) {
    const int a = snap.greedy_action(h, s, spec.features);
    trace.features.push_back(spec.features.phi(s, a));
    const StepResult step_out = step(spec, h, s, a, rng);
    trace.actions.push_back(a);
    trace.rewards.push_back(step_out.reward);
    trace.states.push_back(step_out.next_state);
    s = step_out.next_state;
  }
  return trace;
}

// Full experiment loop. Per episode k:
//
//   1. record log det(Lambda_h^k) for every stage (data through k-1),
//   2. ask the scheduler whether to refit; if so, fit a fresh snapshot from
//      the live Gram states, extract its greedy policy, and evaluate that
//      policy exactly,
//   3. play the episode against the current snapshot on the substream
//      derived from (seed, k): the initial-state draw (when distributed)
//      comes first, then one draw per step,
//   4. account regret as V*_1(s_1) - V^pi_1(s_1) at the drawn start state,
//   5. push the episode's features into the live Gram states.
//
// Every scheduler fits at k = 1 (the empty-history, pure-bonus snapshot);
// for det_switch that initial fit sets the anchors and is not counted as a
// switch, so n_switches = |switch_episodes| - 1 for that scheduler and
// |switch_episodes| - 0 matches refit counts for the others only through
// their own fields. A NumericalError mid-run aborts cleanly: the report
// keeps everything up to the failed episode and is flagged invalid.
inline RunReport run_experiment(const RunConfig& cfg) {
  validate_config(cfg);
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  RunReport report;
  report.config = cfg;
  report.spec = resolve_spec(cfg);
  const LinearMdp& spec = report.spec;
  const int H = spec.horizon;
  const std::int64_t K = cfg.episodes;
  report.beta = beta_coefficient(cfg.bonus_scale, spec.dim(), H, K, cfg.delta);

  std::optional<BatchGrid> grid;
  double eta = 0.0;
  if (cfg.scheduler.kind == SchedulerKind::kUniformBatch) {
    grid = batch_grid(K, *cfg.scheduler.budget);
    report.grid = grid;
  } else if (cfg.scheduler.kind == SchedulerKind::kDetSwitch) {
    eta = cfg.scheduler.eta
              ? *cfg.scheduler.eta
              : eta_from_budget(K, spec.dim(), H, *cfg.scheduler.budget);
    report.eta = eta;
  }

  const auto t_oracle = clock::now();
  const ValueTables opt = optimal_values(spec);
  report.timing.oracle_seconds = seconds_since(t_oracle);

  std::vector<GramState> grams;
  grams.reserve(H);
  for (int h = 0; h < H; ++h)
    grams.emplace_back(spec.dim(), cfg.ridge, cfg.gram_refresh);

  std::vector<double> anchors;          // det_switch anchor log-dets
  std::size_t grid_pos = 0;             // next unused batch grid point
  const QSnapshot* current = nullptr;   // owned by report.snapshots
  double cum_regret = 0.0;

  report.per_episode.reserve(K);
  report.traces.reserve(K);
  report.gram_logdets.reserve(K + 1);

  const auto stage_logdets = [&grams, H] {
    std::vector<double> out(H);
    for (int h = 0; h < H; ++h) out[h] = grams[h].log_det();
    return out;
  };

  try {
    for (std::int64_t k = 1; k <= K; ++k) {
      std::vector<double> logdets = stage_logdets();
      report.gram_logdets.push_back(logdets);

      bool refit = false;
      switch (cfg.scheduler.kind) {
        case SchedulerKind::kFull:
          refit = true;
          break;
        case SchedulerKind::kUniformBatch:
          refit = grid_pos < grid->points.size() &&
                  k == grid->points[grid_pos];
          if (refit) ++grid_pos;
          break;
        case SchedulerKind::kDetSwitch:
          refit = k == 1 || det_switch_decision(logdets, anchors, eta);
          break;
      }

      if (refit) {
        const auto t_fit = clock::now();
        SnapshotRecord rec;
        rec.episode = k;
        rec.snapshot =
            fit_snapshot(report.traces, spec.features, grams, report.beta, k);
        rec.policy = extract_greedy_policy(rec.snapshot, spec.features);
        rec.policy_v = policy_values(spec, rec.policy);
        report.snapshots.push_back(std::move(rec));
        current = &report.snapshots.back().snapshot;
        report.switch_episodes.push_back(k);
        if (cfg.scheduler.kind == SchedulerKind::kDetSwitch)
          anchors = std::move(logdets);
        report.timing.fit_seconds += seconds_since(t_fit);
      }

      const auto t_act = clock::now();
      RandomStream episode_rng = RandomStream::substream(cfg.seed, k);
      const int s1 = draw_initial_state(spec, episode_rng);
      EpisodeTrace trace = run_episode(spec, *current, s1, episode_rng);
      report.timing.act_seconds += seconds_since(t_act);

      const SnapshotRecord& active = report.snapshots.back();
      // Exact-arithmetic regret is nonnegative; the clamp only strips
      // negative rounding dust so the cumulative column is nondecreasing.
      const double inst =
          std::max(0.0, opt.v(0, s1) - active.policy_v(0, s1));
      cum_regret += inst;

      EpisodeRow row;
      row.episode = k;
      row.fit_episode = active.episode;
      row.inst_regret = inst;
      row.cum_regret = cum_regret;
      row.switches_so_far =
          static_cast<std::int64_t>(report.switch_episodes.size()) - 1;
      row.realized_return = trace.total_reward();
      report.per_episode.push_back(row);

      for (int h = 0; h < H; ++h) grams[h].update(trace.features[h]);
      report.traces.push_back(std::move(trace));
    }
    report.gram_logdets.push_back(stage_logdets());
  } catch (const NumericalError& e) {
    report.valid = false;
    report.failure = e.what();
  }

  report.n_switches =
      static_cast<std::int64_t>(report.switch_episodes.size()) - 1;
  report.timing.total_seconds = seconds_since(t_start);
  return report;
}

}  // namespace lsvi
