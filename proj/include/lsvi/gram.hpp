#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsvi/errors.hpp"

namespace lsvi {

inline constexpr int kDefaultRefreshPeriod = 512;
inline constexpr double kFeatureNormTol = 1e-9;
inline constexpr double kIdentityTol = 1e-8;
inline constexpr double kSpdJitter = 1e-12;

// Regularized Gram matrix
//
//   Lambda = ridge * I + sum_i phi_i phi_i^T,   ||phi_i||_2 <= 1,
//
// maintained together with its inverse and log-determinant.
//
// Updates are rank-1 and O(d^2): the inverse moves by the Sherman-Morrison
// identity and the log-determinant by log(1 + phi' Lambda^{-1} phi), where
// the quadratic form is taken against the pre-update inverse. Drift in the
// maintained inverse is bounded by a direct refactorization from the stored
// update history, taken every refresh_period updates or as soon as
// max|Lambda * inv - I| exceeds 1e-8.
//
// Plain value type: copyable, no shared state, safe to freeze into
// snapshots.
class GramState {
 public:
  GramState(int dim, double ridge, int refresh_period = kDefaultRefreshPeriod)
      : dim_(dim), ridge_(ridge), refresh_period_(refresh_period) {
    if (dim < 1) throw std::invalid_argument("GramState: dim must be >= 1");
    if (!(ridge > 0.0))
      throw std::invalid_argument("GramState: ridge must be > 0");
    if (refresh_period < 1)
      throw std::invalid_argument("GramState: refresh_period must be >= 1");
    mat_ = ridge * Eigen::MatrixXd::Identity(dim, dim);
    inv_ = (1.0 / ridge) * Eigen::MatrixXd::Identity(dim, dim);
    log_det_ = dim * std::log(ridge);
  }

  // Adds phi phi^T. The zero vector is accepted and leaves the matrix
  // unchanged; anything outside the unit ball (beyond tolerance) is
  // rejected before any state is touched.
  void update(const Eigen::VectorXd& phi) {
    check_dim(phi, "update");
    const double norm = phi.norm();
    if (norm > 1.0 + kFeatureNormTol)
      throw InvalidFeatureError("GramState::update: ||phi||_2 = " +
                                std::to_string(norm) + " exceeds 1");
    const Eigen::VectorXd iv = inv_ * phi;
    const double q = phi.dot(iv);
    mat_.noalias() += phi * phi.transpose();
    inv_.noalias() -= (iv * iv.transpose()) / (1.0 + q);
    log_det_ += std::log1p(q);
    history_.push_back(phi);
    if (history_.size() % static_cast<std::size_t>(refresh_period_) == 0 ||
        identity_deviation() > kIdentityTol) {
      refresh();
    }
  }

  // phi' Lambda^{-1} phi against the maintained inverse, clamped at zero.
  double quad_form(const Eigen::VectorXd& phi) const {
    check_dim(phi, "quad_form");
    return std::max(0.0, phi.dot(inv_ * phi));
  }

  // Solves Lambda x = b by a fresh Cholesky factorization of the maintained
  // matrix; accuracy does not depend on the incremental inverse.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    check_dim(b, "solve");
    return spd_llt(mat_, "solve").solve(b);
  }

  // Direct refactorization from the stored update history: re-accumulates
  // ridge * I + sum phi phi^T, refactors it, and resets inverse and
  // log-determinant from the factor.
  void refresh() {
    Eigen::MatrixXd fresh = ridge_ * Eigen::MatrixXd::Identity(dim_, dim_);
    for (const Eigen::VectorXd& phi : history_)
      fresh.noalias() += phi * phi.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt = spd_llt(fresh, "refresh");
    mat_ = std::move(fresh);
    inv_ = llt.solve(Eigen::MatrixXd::Identity(dim_, dim_));
    inv_ = ((inv_ + inv_.transpose()) * 0.5).eval();
    log_det_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }

  const Eigen::MatrixXd& matrix() const { return mat_; }
  const Eigen::MatrixXd& inverse() const { return inv_; }
  double log_det() const { return log_det_; }
  int dim() const { return dim_; }
  double ridge() const { return ridge_; }
  int refresh_period() const { return refresh_period_; }
  std::int64_t n_updates() const {
    return static_cast<std::int64_t>(history_.size());
  }

 private:
  void check_dim(const Eigen::VectorXd& v, const char* where) const {
    if (v.size() != dim_)
      throw std::invalid_argument(std::string("GramState::") + where +
                                  ": vector has size " +
                                  std::to_string(v.size()) + ", expected " +
                                  std::to_string(dim_));
  }

  double identity_deviation() const {
    return (mat_ * inv_ - Eigen::MatrixXd::Identity(dim_, dim_))
        .cwiseAbs()
        .maxCoeff();
  }

  // LLT with one jitter retry. The matrices here are ridge * I plus a PSD
  // sum, so failure indicates accumulated damage rather than bad input.
  static Eigen::LLT<Eigen::MatrixXd> spd_llt(const Eigen::MatrixXd& m,
                                             const char* where) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    Eigen::MatrixXd jittered =
        m + kSpdJitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt;
    throw NumericalError(std::string("GramState::") + where +
                         ": SPD factorization failed after jitter retry");
  }

  int dim_;
  double ridge_;
  int refresh_period_;
  Eigen::MatrixXd mat_;
  Eigen::MatrixXd inv_;
  double log_det_ = 0.0;
  std::vector<Eigen::VectorXd> history_;
};

}  // namespace lsvi
