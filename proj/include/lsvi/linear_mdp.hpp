#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsvi/errors.hpp"
#include "lsvi/rng.hpp"

namespace lsvi {

inline constexpr double kTransitionSumTol = 1e-12;
inline constexpr double kParamNormTol = 1e-9;

// Feature table over a finite state-action space, phi(s,a) in R^d with
// ||phi||_2 <= 1. Stored row-major by (s,a); entries are immutable after
// construction.
struct FeatureMap {
  int states = 0;
  int actions = 0;
  int dim = 0;
  std::vector<Eigen::VectorXd> table;  // index s * actions + a

  const Eigen::VectorXd& phi(int s, int a) const {
    if (s < 0 || s >= states)
      throw std::invalid_argument("FeatureMap::phi: state " +
                                  std::to_string(s) + " out of range");
    if (a < 0 || a >= actions)
      throw std::invalid_argument("FeatureMap::phi: action " +
                                  std::to_string(a) + " out of range");
    return table[static_cast<std::size_t>(s) * actions + a];
  }
};

// Fixed state when distribution is empty, otherwise a categorical draw over
// states at the start of each episode.
struct InitialState {
  int state = 0;
  std::vector<double> distribution;

  bool is_fixed() const { return distribution.empty(); }
};

// Episodic MDP with linear structure: for each stage h,
//
//   P_h(s'|s,a) = <phi(s,a), mu_h(s')>     (measures[h] column s' is mu_h(s'))
//   r_h(s,a)    = <phi(s,a), rewards[h]>   in [0,1].
//
// Time-inhomogeneous: measures and rewards both have one entry per stage.
struct LinearMdp {
  int horizon = 0;
  FeatureMap features;
  std::vector<Eigen::MatrixXd> measures;  // per stage, dim x states
  std::vector<Eigen::VectorXd> rewards;   // per stage, dim
  InitialState initial;

  int states() const { return features.states; }
  int actions() const { return features.actions; }
  int dim() const { return features.dim; }

  double reward(int h, int s, int a) const {
    return rewards[h].dot(features.phi(s, a));
  }

  // P_h(.|s,a) as a dense length-S vector.
  Eigen::VectorXd transition_row(int h, int s, int a) const {
    return measures[h].transpose() * features.phi(s, a);
  }
};

// Checks every structural requirement and throws std::invalid_argument with
// the offending index on the first failure:
//   - shapes consistent across features, measures, rewards, horizon
//   - ||phi(s,a)||_2 <= 1 + 1e-9
//   - each phi' M_h is a probability vector: entries in [-1e-12, 1+1e-12],
//     sum within 1e-12 of 1
//   - r_h(s,a) in [-1e-12, 1 + 1e-12]
//   - ||theta_h||_2 and ||row sums of M_h||_2 at most sqrt(d) + 1e-9
//   - initial state valid (index in range, or distribution over states
//     summing to 1 within 1e-12)
inline void validate(const LinearMdp& m) {
  const int S = m.states(), A = m.actions(), d = m.dim(), H = m.horizon;
  if (H < 1) throw std::invalid_argument("LinearMdp: horizon must be >= 1");
  if (S < 1 || A < 1 || d < 1)
    throw std::invalid_argument("LinearMdp: states, actions, dim must be >= 1");
  if (m.features.table.size() != static_cast<std::size_t>(S) * A)
    throw std::invalid_argument("LinearMdp: feature table has " +
                                std::to_string(m.features.table.size()) +
                                " entries, expected " + std::to_string(S * A));
  if (m.measures.size() != static_cast<std::size_t>(H) ||
      m.rewards.size() != static_cast<std::size_t>(H))
    throw std::invalid_argument(
        "LinearMdp: measures and rewards must have one entry per stage");

  const double sqrt_d = std::sqrt(static_cast<double>(d));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const Eigen::VectorXd& phi = m.features.phi(s, a);
      if (phi.size() != d)
        throw std::invalid_argument("LinearMdp: phi(" + std::to_string(s) +
                                    "," + std::to_string(a) +
                                    ") has wrong dimension");
      if (phi.norm() > 1.0 + kParamNormTol)
        throw InvalidFeatureError("LinearMdp: ||phi(" + std::to_string(s) +
                                  "," + std::to_string(a) + ")||_2 = " +
                                  std::to_string(phi.norm()) + " exceeds 1");
    }
  }

  for (int h = 0; h < H; ++h) {
    if (m.measures[h].rows() != d || m.measures[h].cols() != S)
      throw std::invalid_argument("LinearMdp: measures[" + std::to_string(h) +
                                  "] must be dim x states");
    if (m.rewards[h].size() != d)
      throw std::invalid_argument("LinearMdp: rewards[" + std::to_string(h) +
                                  "] must have length dim");
    if (m.rewards[h].norm() > sqrt_d + kParamNormTol)
      throw std::invalid_argument("LinearMdp: ||rewards[" + std::to_string(h) +
                                  "]||_2 exceeds sqrt(dim)");
    if (m.measures[h].rowwise().sum().norm() > sqrt_d + kParamNormTol)
      throw std::invalid_argument("LinearMdp: total measure norm at stage " +
                                  std::to_string(h) + " exceeds sqrt(dim)");
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd row = m.transition_row(h, s, a);
        double sum = 0.0;
        for (int t = 0; t < S; ++t) {
          if (row[t] < -kTransitionSumTol || row[t] > 1.0 + kTransitionSumTol)
            throw std::invalid_argument(
                "LinearMdp: P_" + std::to_string(h) + "(" + std::to_string(t) +
                "|" + std::to_string(s) + "," + std::to_string(a) + ") = " +
                std::to_string(row[t]) + " is not a probability");
          sum += row[t];
        }
        if (std::abs(sum - 1.0) > kTransitionSumTol)
          throw std::invalid_argument(
              "LinearMdp: transition row at (h=" + std::to_string(h) +
              ",s=" + std::to_string(s) + ",a=" + std::to_string(a) +
              ") sums to " + std::to_string(sum));
        const double r = m.reward(h, s, a);
        if (r < -kTransitionSumTol || r > 1.0 + kTransitionSumTol)
          throw std::invalid_argument(
              "LinearMdp: reward at (h=" + std::to_string(h) +
              ",s=" + std::to_string(s) + ",a=" + std::to_string(a) + ") = " +
              std::to_string(r) + " outside [0,1]");
      }
    }
  }

  if (m.initial.is_fixed()) {
    if (m.initial.state < 0 || m.initial.state >= S)
      throw std::invalid_argument("LinearMdp: initial state out of range");
  } else {
    if (m.initial.distribution.size() != static_cast<std::size_t>(S))
      throw std::invalid_argument(
          "LinearMdp: initial distribution must have one entry per state");
    double sum = 0.0;
    for (double p : m.initial.distribution) {
      if (p < -kTransitionSumTol)
        throw std::invalid_argument(
            "LinearMdp: initial distribution has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kTransitionSumTol)
      throw std::invalid_argument("LinearMdp: initial distribution sums to " +
                                  std::to_string(sum));
  }
}

// Exact embedding of a finite tabular MDP: d = S * A, phi(s,a) is the
// indicator of index s * A + a, measure columns carry the transition rows
// and theta the reward table. Input rows may be off by up to 1e-9 from unit
// mass (light float damage from upstream tooling); they are renormalized so
// the built model meets the stricter 1e-12 contract.
//
//   transitions[h][s][a]: length-S probability vector
//   reward_table[h][s][a]: scalar in [0,1]
inline LinearMdp tabular_embedding(
    const std::vector<std::vector<std::vector<std::vector<double>>>>&
        transitions,
    const std::vector<std::vector<std::vector<double>>>& reward_table,
    InitialState initial = {}) {
  if (transitions.empty())
    throw std::invalid_argument("tabular_embedding: empty transition table");
  if (reward_table.size() != transitions.size())
    throw std::invalid_argument(
        "tabular_embedding: transition and reward tables disagree on horizon");
  const int H = static_cast<int>(transitions.size());
  const int S = static_cast<int>(transitions[0].size());
  if (S < 1) throw std::invalid_argument("tabular_embedding: no states");
  const int A = static_cast<int>(transitions[0][0].size());
  if (A < 1) throw std::invalid_argument("tabular_embedding: no actions");
  const int d = S * A;

  LinearMdp m;
  m.horizon = H;
  m.features.states = S;
  m.features.actions = A;
  m.features.dim = d;
  m.features.table.reserve(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
      e[s * A + a] = 1.0;
      m.features.table.push_back(std::move(e));
    }
  }

  m.measures.assign(H, Eigen::MatrixXd::Zero(d, S));
  m.rewards.assign(H, Eigen::VectorXd::Zero(d));
  for (int h = 0; h < H; ++h) {
    if (transitions[h].size() != static_cast<std::size_t>(S) ||
        reward_table[h].size() != static_cast<std::size_t>(S))
      throw std::invalid_argument("tabular_embedding: ragged stage " +
                                  std::to_string(h));
    for (int s = 0; s < S; ++s) {
      if (transitions[h][s].size() != static_cast<std::size_t>(A) ||
          reward_table[h][s].size() != static_cast<std::size_t>(A))
        throw std::invalid_argument("tabular_embedding: ragged state row at "
                                    "(h=" +
                                    std::to_string(h) +
                                    ",s=" + std::to_string(s) + ")");
      for (int a = 0; a < A; ++a) {
        const std::vector<double>& row = transitions[h][s][a];
        if (row.size() != static_cast<std::size_t>(S))
          throw std::invalid_argument(
              "tabular_embedding: transition row at (h=" + std::to_string(h) +
              ",s=" + std::to_string(s) + ",a=" + std::to_string(a) +
              ") has wrong length");
        double sum = 0.0;
        for (double p : row) {
          if (p < 0.0)
            throw std::invalid_argument(
                "tabular_embedding: negative transition probability at (h=" +
                std::to_string(h) + ",s=" + std::to_string(s) +
                ",a=" + std::to_string(a) + ")");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw std::invalid_argument(
              "tabular_embedding: transition row at (h=" + std::to_string(h) +
              ",s=" + std::to_string(s) + ",a=" + std::to_string(a) +
              ") sums to " + std::to_string(sum));
        const double r = reward_table[h][s][a];
        if (r < 0.0 || r > 1.0)
          throw std::invalid_argument(
              "tabular_embedding: reward at (h=" + std::to_string(h) +
              ",s=" + std::to_string(s) + ",a=" + std::to_string(a) +
              ") outside [0,1]");
        const int idx = s * A + a;
        for (int t = 0; t < S; ++t) m.measures[h](idx, t) = row[t] / sum;
        m.rewards[h][idx] = r;
      }
    }
  }

  m.initial = std::move(initial);
  validate(m);
  return m;
}

namespace detail {

// Uniform point on the probability simplex via normalized Exp(1) draws.
inline Eigen::VectorXd simplex_point(int n, RandomStream& rng) {
  Eigen::VectorXd w(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = -std::log1p(-rng.uniform01());
    sum += w[i];
  }
  if (sum <= 0.0) return Eigen::VectorXd::Zero(n);  // caller resamples
  return w / sum;
}

}  // namespace detail

// Random valid instance. Features are uniform simplex points (nonnegative,
// unit L1 mass, hence inside the unit L2 ball); measure rows are simplex
// points over states, which makes every phi' M_h a convex combination of
// probability vectors; rewards are uniform on [0,1]^d. Draw order is fixed,
// so one seed maps to one instance. Resamples on validation failure, at most
// 100 times, then raises GenerationError.
inline LinearMdp make_random_mdp(int dim, int states, int actions, int horizon,
                                 std::uint64_t seed) {
  if (dim < 2)
    throw std::invalid_argument("make_random_mdp: dim must be >= 2");
  if (states < 1 || actions < 1 || horizon < 1)
    throw std::invalid_argument(
        "make_random_mdp: states, actions, horizon must be >= 1");

  RandomStream rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    LinearMdp m;
    m.horizon = horizon;
    m.features.states = states;
    m.features.actions = actions;
    m.features.dim = dim;
    m.features.table.reserve(static_cast<std::size_t>(states) * actions);
    for (int i = 0; i < states * actions; ++i)
      m.features.table.push_back(detail::simplex_point(dim, rng));
    m.measures.assign(horizon, Eigen::MatrixXd::Zero(dim, states));
    for (int h = 0; h < horizon; ++h)
      for (int i = 0; i < dim; ++i)
        m.measures[h].row(i) = detail::simplex_point(states, rng).transpose();
    m.rewards.assign(horizon, Eigen::VectorXd::Zero(dim));
    for (int h = 0; h < horizon; ++h)
      for (int i = 0; i < dim; ++i) m.rewards[h][i] = rng.uniform01();
    m.initial.state = 0;
    try {
      validate(m);
      return m;
    } catch (const std::invalid_argument&) {
      continue;  // resample
    }
  }
  throw GenerationError(
      "make_random_mdp: no valid instance after 100 attempts");
}

struct StepResult {
  double reward = 0.0;
  int next_state = 0;
};

// One environment transition. The next state is an inverse-CDF draw from
// phi' M_h using a single uniform sample, so a run consumes exactly one draw
// per step.
inline StepResult step(const LinearMdp& m, int h, int s, int a,
                       RandomStream& rng) {
  if (h < 0 || h >= m.horizon)
    throw std::invalid_argument("step: stage " + std::to_string(h) +
                                " out of range");
  const Eigen::VectorXd row = m.transition_row(h, s, a);
  StepResult out;
  out.reward = m.reward(h, s, a);
  out.next_state = categorical_draw(row.data(), m.states(), rng.uniform01());
  return out;
}

// Start-of-episode state; consumes a uniform draw only when the initial
// state is a distribution.
inline int draw_initial_state(const LinearMdp& m, RandomStream& rng) {
  if (m.initial.is_fixed()) return m.initial.state;
  return categorical_draw(m.initial.distribution, rng.uniform01());
}

// Exact value tables from backward induction.
//   v: (H+1) x S with v.row(H) = 0
//   q[h]: S x A
struct ValueTables {
  Eigen::MatrixXd v;
  std::vector<Eigen::MatrixXd> q;
};

inline ValueTables optimal_values(const LinearMdp& m) {
  const int S = m.states(), A = m.actions(), H = m.horizon;
  ValueTables t;
  t.v = Eigen::MatrixXd::Zero(H + 1, S);
  t.q.assign(H, Eigen::MatrixXd::Zero(S, A));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      for (int a = 0; a < A; ++a) {
        const double qa =
            m.reward(h, s, a) + m.transition_row(h, s, a).dot(t.v.row(h + 1));
        t.q[h](s, a) = qa;
        if (a == 0 || qa > best) best = qa;
      }
      t.v(h, s) = best;
    }
  }
  return t;
}

// Exact evaluation of a deterministic policy, policy[h][s] in [0, A).
inline Eigen::MatrixXd policy_values(
    const LinearMdp& m, const std::vector<std::vector<int>>& policy) {
  const int S = m.states(), A = m.actions(), H = m.horizon;
  if (policy.size() != static_cast<std::size_t>(H))
    throw std::invalid_argument("policy_values: policy must have H stages");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(H + 1, S);
  for (int h = H - 1; h >= 0; --h) {
    if (policy[h].size() != static_cast<std::size_t>(S))
      throw std::invalid_argument("policy_values: stage " + std::to_string(h) +
                                  " must cover all states");
    for (int s = 0; s < S; ++s) {
      const int a = policy[h][s];
      if (a < 0 || a >= A)
        throw std::invalid_argument(
            "policy_values: action out of range at (h=" + std::to_string(h) +
            ",s=" + std::to_string(s) + ")");
      v(h, s) = m.reward(h, s, a) + m.transition_row(h, s, a).dot(v.row(h + 1));
    }
  }
  return v;
}

}  // namespace lsvi
