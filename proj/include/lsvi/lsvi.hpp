#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lsvi/gram.hpp"
#include "lsvi/linear_mdp.hpp"

namespace lsvi {

// One trajectory: states has H+1 entries, actions/rewards/features have H.
// features caches phi(s_h, a_h) so downstream consumers never re-touch the
// feature map.
struct EpisodeTrace {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<Eigen::VectorXd> features;

  double total_reward() const {
    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum;
  }
};

// Frozen per-stage regression output: ridge weights plus the Gram inverse
// and log-determinant at fit time.
struct StageFit {
  Eigen::VectorXd weights;
  Eigen::MatrixXd gram_inv;
  double gram_log_det = 0.0;
};

namespace detail {

// Optimistic Q against a frozen stage fit, shared by the fitting loop and
// the public snapshot so both evaluate identically:
//   Q(phi) = clamp(w' phi + beta * sqrt(phi' inv phi), [0, H - h])
// with h zero-based, so the cap is the largest reward still collectable.
inline double clipped_q(const StageFit& sf, double beta, int horizon, int h,
                        const Eigen::VectorXd& phi) {
  const double quad = std::max(0.0, phi.dot(sf.gram_inv * phi));
  const double raw = sf.weights.dot(phi) + beta * std::sqrt(quad);
  return std::clamp(raw, 0.0, static_cast<double>(horizon - h));
}

}  // namespace detail

// Immutable fitted value function. Episodes played between refits all read
// from one snapshot, which is what makes batching observable: the snapshot
// never sees data collected after its fit_episode.
class QSnapshot {
 public:
  QSnapshot() = default;
  QSnapshot(int horizon, double beta, std::int64_t fit_episode,
            std::vector<StageFit> stages)
      : horizon_(horizon),
        beta_(beta),
        fit_episode_(fit_episode),
        stages_(std::move(stages)) {
    if (stages_.size() != static_cast<std::size_t>(horizon_))
      throw std::invalid_argument("QSnapshot: one stage fit per stage");
  }

  double q_value(int h, const Eigen::VectorXd& phi) const {
    return detail::clipped_q(stage(h), beta_, horizon_, h, phi);
  }

  double bonus(int h, const Eigen::VectorXd& phi) const {
    return beta_ * std::sqrt(std::max(0.0, phi.dot(stage(h).gram_inv * phi)));
  }

  // Ties break toward the lowest action index.
  int greedy_action(int h, int s, const FeatureMap& features) const {
    int best_a = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < features.actions; ++a) {
      const double q = q_value(h, features.phi(s, a));
      if (q > best_q) {
        best_q = q;
        best_a = a;
      }
    }
    return best_a;
  }

  int horizon() const { return horizon_; }
  double beta() const { return beta_; }
  std::int64_t fit_episode() const { return fit_episode_; }

  const StageFit& stage(int h) const {
    if (h < 0 || h >= horizon_)
      throw std::invalid_argument("QSnapshot: stage " + std::to_string(h) +
                                  " out of range");
    return stages_[h];
  }

 private:
  int horizon_ = 0;
  double beta_ = 0.0;
  std::int64_t fit_episode_ = 0;
  std::vector<StageFit> stages_;
};

namespace detail {

inline void check_traces(const std::vector<EpisodeTrace>& history,
                         int horizon) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    const EpisodeTrace& t = history[i];
    if (t.states.size() != static_cast<std::size_t>(horizon) + 1 ||
        t.actions.size() != static_cast<std::size_t>(horizon) ||
        t.rewards.size() != static_cast<std::size_t>(horizon) ||
        t.features.size() != static_cast<std::size_t>(horizon))
      throw std::invalid_argument("fit_snapshot: trace " + std::to_string(i) +
                                  " does not match the horizon");
  }
}

}  // namespace detail

// Backward ridge regression over the full history. For each stage, from the
// last to the first,
//
//   w_h = Lambda_h^{-1} sum_tau phi_tau [ r_tau + max_a Q_{h+1}(s'_tau, a) ]
//
// where Q_{h+1} is this same snapshot's already-fitted next stage. The
// per-stage Gram states are supplied by the caller and must already contain
// exactly the history's features. Regression targets reuse a per-state cache
// of max_a Q_{h+1}, so cost per stage is O(S A d^2 + n d) regardless of how
// often states repeat.
inline QSnapshot fit_snapshot(const std::vector<EpisodeTrace>& history,
                              const FeatureMap& features,
                              const std::vector<GramState>& grams, double beta,
                              std::int64_t fit_episode) {
  const int H = static_cast<int>(grams.size());
  if (H < 1) throw std::invalid_argument("fit_snapshot: no stages");
  detail::check_traces(history, H);
  for (const GramState& g : grams) {
    if (g.dim() != features.dim)
      throw std::invalid_argument(
          "fit_snapshot: gram dimension does not match features");
    if (g.n_updates() != static_cast<std::int64_t>(history.size()))
      throw std::invalid_argument(
          "fit_snapshot: gram update count does not match the history");
  }

  std::vector<StageFit> stages(H);
  std::vector<double> next_max(features.states);
  for (int h = H - 1; h >= 0; --h) {
    std::vector<bool> cached(features.states, false);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(features.dim);
    for (const EpisodeTrace& t : history) {
      double target = t.rewards[h];
      if (h + 1 < H) {
        const int sn = t.states[h + 1];
        if (!cached[sn]) {
          double best = -std::numeric_limits<double>::infinity();
          for (int a = 0; a < features.actions; ++a)
            best = std::max(best, detail::clipped_q(stages[h + 1], beta, H,
                                                    h + 1, features.phi(sn, a)));
          next_max[sn] = best;
          cached[sn] = true;
        }
        target += next_max[sn];
      }
      rhs.noalias() += target * t.features[h];
    }
    stages[h].weights = grams[h].solve(rhs);
    stages[h].gram_inv = grams[h].inverse();
    stages[h].gram_log_det = grams[h].log_det();
  }
  return QSnapshot(H, beta, fit_episode, std::move(stages));
}

// Convenience overload that accumulates the Gram states from the history
// itself (ridge * I plus one update per trace, in order). Produces exactly
// the same snapshot as maintaining the Gram states incrementally alongside
// the history, since both routes perform the identical update sequence.
inline QSnapshot fit_snapshot(const std::vector<EpisodeTrace>& history,
                              const FeatureMap& features, int horizon,
                              double beta, double ridge,
                              int refresh_period = kDefaultRefreshPeriod) {
  if (horizon < 1) throw std::invalid_argument("fit_snapshot: horizon >= 1");
  detail::check_traces(history, horizon);
  std::vector<GramState> grams;
  grams.reserve(horizon);
  for (int h = 0; h < horizon; ++h)
    grams.emplace_back(features.dim, ridge, refresh_period);
  for (const EpisodeTrace& t : history)
    for (int h = 0; h < horizon; ++h) grams[h].update(t.features[h]);
  return fit_snapshot(history, features, grams, beta,
                      static_cast<std::int64_t>(history.size()) + 1);
}

// Greedy policy table of a snapshot over the whole state space.
inline std::vector<std::vector<int>> extract_greedy_policy(
    const QSnapshot& snap, const FeatureMap& features) {
  std::vector<std::vector<int>> policy(snap.horizon(),
                                       std::vector<int>(features.states));
  for (int h = 0; h < snap.horizon(); ++h)
    for (int s = 0; s < features.states; ++s)
      policy[h][s] = snap.greedy_action(h, s, features);
  return policy;
}

// Exploration coefficient beta = c * d * H * sqrt(log(2 d T / delta)),
// T = K * H.
inline double beta_coefficient(double bonus_scale, int dim, int horizon,
                               std::int64_t episodes, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("beta_coefficient: delta must lie in (0,1)");
  const double t = static_cast<double>(episodes) * horizon;
  return bonus_scale * dim * horizon *
         std::sqrt(std::log(2.0 * dim * t / delta));
}

}  // namespace lsvi
