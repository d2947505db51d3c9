#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsvi {

// Pre-committed refit schedule: episodes t_i = (i-1) * max(1, floor(K/B)) + 1
// for i = 1..B, truncated at K. The spacing clamp keeps the grid strictly
// increasing when B > K, in which case every episode up to K refits and the
// grid has K points. sentinel is one past the final episode.
struct BatchGrid {
  std::vector<std::int64_t> points;
  std::int64_t sentinel = 0;
};

inline BatchGrid batch_grid(std::int64_t episodes, std::int64_t batches) {
  if (episodes < 1)
    throw std::invalid_argument("batch_grid: episodes must be >= 1");
  if (batches < 1)
    throw std::invalid_argument("batch_grid: batches must be >= 1");
  const std::int64_t spacing = std::max<std::int64_t>(1, episodes / batches);
  BatchGrid grid;
  for (std::int64_t i = 0; i < batches; ++i) {
    const std::int64_t t = i * spacing + 1;
    if (t > episodes) break;
    grid.points.push_back(t);
  }
  grid.sentinel = episodes + 1;
  return grid;
}

// Determinant growth threshold that makes the switching bound below equal
// the budget: eta = (1 + K/d)^(dH/B), floored just above 1 so the strict
// trigger cannot fire on every episode when the exponent underflows.
inline double eta_from_budget(std::int64_t episodes, int dim, int horizon,
                              std::int64_t budget) {
  if (episodes < 1 || dim < 1 || horizon < 1 || budget < 1)
    throw std::invalid_argument("eta_from_budget: all arguments must be >= 1");
  const double eta =
      std::pow(1.0 + static_cast<double>(episodes) / dim,
               static_cast<double>(dim) * horizon / static_cast<double>(budget));
  return std::max(eta, 1.0 + 1e-12);
}

// Switch test on log-determinants: refit when any stage has grown by a
// factor of eta since the anchor snapshot. Strict comparison in log space;
// equality does not trigger.
inline bool det_switch_decision(const std::vector<double>& current_log_dets,
                                const std::vector<double>& anchor_log_dets,
                                double eta) {
  if (current_log_dets.size() != anchor_log_dets.size())
    throw std::invalid_argument(
        "det_switch_decision: log-det vectors differ in length");
  if (!(eta > 0.0))
    throw std::invalid_argument("det_switch_decision: eta must be positive");
  const double log_eta = std::log(eta);
  for (std::size_t h = 0; h < current_log_dets.size(); ++h)
    if (current_log_dets[h] > anchor_log_dets[h] + log_eta) return true;
  return false;
}

// Deterministic ceiling on the number of det-triggered switches:
//
//   N_switch <= d H log(1 + K / (lambda d)) / log(eta).
//
// With eta = eta_from_budget(K, d, H, B) and lambda = 1 the right side is
// exactly B.
inline double switch_count_bound(int dim, int horizon, std::int64_t episodes,
                                 double ridge, double eta) {
  if (dim < 1 || horizon < 1 || episodes < 1)
    throw std::invalid_argument(
        "switch_count_bound: dim, horizon, episodes must be >= 1");
  if (!(ridge > 0.0))
    throw std::invalid_argument("switch_count_bound: ridge must be > 0");
  if (!(eta > 1.0))
    throw std::invalid_argument("switch_count_bound: eta must exceed 1");
  return static_cast<double>(dim) * horizon *
         std::log1p(static_cast<double>(episodes) / (ridge * dim)) /
         std::log(eta);
}

}  // namespace lsvi
