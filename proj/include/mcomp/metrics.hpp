#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/types.hpp"

namespace mcomp {

/// ||M - M_hat||_F / sqrt(mn).
inline double rmse(const DenseMatrix& truth, const DenseMatrix& estimate) {
  detail::require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
                  "rmse: shape mismatch");
  detail::require(truth.size() > 0, "rmse: empty matrix");
  return (truth - estimate).norm() / std::sqrt(static_cast<double>(truth.size()));
}

inline double rmse(const DenseMatrix& truth, const FactoredMatrix& estimate) {
  detail::require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
                  "rmse: shape mismatch");
  return rmse(truth, factored_to_dense(estimate));
}

struct MaeNmae {
  double mae = 0.0;
  double nmae = 0.0;
};

namespace detail {

template <class Predict>
MaeNmae score_absolute(const SparseObservations& test, double m_max, double m_min, bool clip,
                       Predict&& predict) {
  require(m_max > m_min, "mae_nmae: M_max must exceed M_min");
  require(!test.empty(), "mae_nmae: empty test set");
  double total = 0.0;
  for (const auto& o : test.entries()) {
    double p = predict(o.row, o.col);
    if (clip) p = std::clamp(p, m_min, m_max);
    total += std::abs(o.value - p);
  }
  MaeNmae out;
  out.mae = total / static_cast<double>(test.size());
  out.nmae = out.mae / (m_max - m_min);
  return out;
}

}  // namespace detail

/// MAE over the test entries and MAE / (M_max - M_min). Predictions are
/// clipped to [M_min, M_max] unless clip is false.
inline MaeNmae mae_nmae(const SparseObservations& test, const DenseMatrix& estimate, double m_max,
                        double m_min, bool clip = true) {
  detail::require(estimate.rows() == test.rows() && estimate.cols() == test.cols(),
                  "mae_nmae: shape mismatch");
  return detail::score_absolute(test, m_max, m_min, clip,
                                [&](int i, int j) { return estimate(i, j); });
}

inline MaeNmae mae_nmae(const SparseObservations& test, const FactoredMatrix& estimate,
                        double m_max, double m_min, bool clip = true) {
  detail::require(estimate.rows() == test.rows() && estimate.cols() == test.cols(),
                  "mae_nmae: shape mismatch");
  const auto pred = estimate.values_at(test);
  std::size_t k = 0;
  return detail::score_absolute(test, m_max, m_min, clip, [&](int, int) { return pred[k++]; });
}

/// sigma * sqrt((2nr - r^2) / (n eps)).
inline double oracle_rmse(double sigma, int n, int r, double epsilon) {
  detail::require(sigma >= 0, "oracle_rmse: sigma must be nonnegative");
  detail::require(n > 0 && epsilon > 0, "oracle_rmse: n * epsilon must be positive");
  const double dof = 2.0 * n * r - static_cast<double>(r) * r;
  detail::require(dof > 0, "oracle_rmse: need 2nr > r^2");
  return sigma * std::sqrt(dof / (n * epsilon));
}

struct OracleFit {
  DenseMatrix estimate;
  int iterations = 0;
  bool converged = false;
};

/// Least-squares fit of U X^T + Y V^T to the observations on E, by CGLS on the
/// r(m+n) unknowns (X, Y) started at zero, so a rank-deficient system yields
/// the minimum-norm solution. U and V are orthonormalized first.
inline OracleFit oracle_fit(const SparseObservations& obs, const DenseMatrix& u,
                            const DenseMatrix& v, double tol = 1e-10, int max_iters = 5000) {
  detail::require(!obs.empty(), "oracle_estimate: no observations");
  detail::require(u.rows() == obs.rows() && v.rows() == obs.cols() && u.cols() == v.cols() &&
                      u.cols() >= 1,
                  "oracle_estimate: factor shapes do not match the observations");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor uq = orthonormalize(u);
  const RowMajor vq = orthonormalize(v);
  const auto r = uq.cols();
  const auto entries = obs.entries();
  const std::size_t count = entries.size();

  // Unknowns: X (n x r) and Y (m x r), stored row-major.
  auto forward = [&](const RowMajor& x, const RowMajor& y, std::vector<double>& out) {
    for (std::size_t k = 0; k < count; ++k) {
      const auto& o = entries[k];
      out[k] = uq.row(o.row).dot(x.row(o.col)) + y.row(o.row).dot(vq.row(o.col));
    }
  };
  auto adjoint = [&](const std::vector<double>& res, RowMajor& gx, RowMajor& gy) {
    gx.setZero();
    gy.setZero();
    for (std::size_t k = 0; k < count; ++k) {
      const auto& o = entries[k];
      gx.row(o.col) += res[k] * uq.row(o.row);
      gy.row(o.row) += res[k] * vq.row(o.col);
    }
  };

  RowMajor x = RowMajor::Zero(obs.cols(), r);
  RowMajor y = RowMajor::Zero(obs.rows(), r);
  std::vector<double> res(count);
  for (std::size_t k = 0; k < count; ++k) res[k] = entries[k].value;
  RowMajor sx(obs.cols(), r), sy(obs.rows(), r);
  adjoint(res, sx, sy);
  RowMajor px = sx, py = sy;
  double gamma = sx.squaredNorm() + sy.squaredNorm();
  const double stop = tol * tol * gamma;
  std::vector<double> q(count);

  OracleFit fit;
  fit.converged = gamma == 0.0;
  while (!fit.converged && fit.iterations < max_iters) {
    forward(px, py, q);
    double qq = 0.0;
    for (double e : q) qq += e * e;
    if (qq == 0.0) break;
    const double alpha = gamma / qq;
    x += alpha * px;
    y += alpha * py;
    for (std::size_t k = 0; k < count; ++k) res[k] -= alpha * q[k];
    adjoint(res, sx, sy);
    const double next = sx.squaredNorm() + sy.squaredNorm();
    ++fit.iterations;
    if (next <= stop) fit.converged = true;
    const double beta = next / gamma;
    gamma = next;
    px = sx + beta * px;
    py = sy + beta * py;
  }
  fit.estimate = uq * x.transpose() + y * vq.transpose();
  return fit;
}

inline DenseMatrix oracle_estimate(const SparseObservations& obs, const DenseMatrix& u,
                                   const DenseMatrix& v) {
  return oracle_fit(obs, u, v).estimate;
}

struct ConvexBoundTerms {
  double sampling = 0.0;
  double noise = 0.0;
  double total() const { return sampling + noise; }
};

/// 7 sqrt(n/|E|) ||P_E(Z)||_F and (2 / (n sqrt(alpha))) ||P_E(Z)||_F.
inline ConvexBoundTerms bound_convex_relaxation_terms(double noise_frobenius, int n, double alpha,
                                                      double e_size) {
  detail::require(noise_frobenius >= 0, "bound_convex_relaxation: noise norm must be nonnegative");
  detail::require(n > 0 && alpha > 0 && e_size > 0, "bound_convex_relaxation: inputs must be positive");
  ConvexBoundTerms t;
  t.sampling = 7.0 * std::sqrt(n / e_size) * noise_frobenius;
  t.noise = 2.0 / (n * std::sqrt(alpha)) * noise_frobenius;
  return t;
}

inline double bound_convex_relaxation(double noise_frobenius, int n, double alpha, double e_size) {
  return bound_convex_relaxation_terms(noise_frobenius, n, alpha, e_size).total();
}

/// C kappa^2 sqrt(alpha r) (n/|E|) ||P_E(Z)||_2; the constant C is unknown, 1 by default.
inline double bound_optspace(double spectral_noise, int n, double alpha, int r, double kappa,
                             double e_size, double c = 1.0) {
  detail::require(spectral_noise >= 0, "bound_optspace: noise norm must be nonnegative");
  detail::require(n > 0 && alpha > 0 && r > 0 && kappa > 0 && e_size > 0 && c > 0,
                  "bound_optspace: inputs must be positive");
  return c * kappa * kappa * std::sqrt(alpha * r) * (n / e_size) * spectral_noise;
}

struct EvalReport {
  double rmse = 0.0;
  std::optional<double> mae;
  std::optional<double> nmae;
  int rank_used = 0;
  double seconds = 0.0;
};

}  // namespace mcomp
