#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/solve_result.hpp"
#include "mcomp/spectral.hpp"

namespace mcomp {

/// Armijo backtracking parameters.
struct LineSearch {
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 50;
};

struct OptSpaceConfig {
  /// Target rank; 0 selects estimate_rank on the observations.
  int rank = 0;
  int max_iters = 500;
  double grad_tol = 1e-6;
  LineSearch step;

  static OptSpaceConfig noiseless() { return {}; }
  static OptSpaceConfig noisy() {
    OptSpaceConfig c;
    c.grad_tol = 1e-4;
    return c;
  }

  void validate() const {
    detail::require(rank >= 0, "OptSpaceConfig: rank must be >= 0 (0 = auto)");
    detail::require(max_iters >= 1, "OptSpaceConfig: max_iters must be positive");
    detail::require(grad_tol > 0, "OptSpaceConfig: grad_tol must be positive");
    detail::require(step.shrink > 0 && step.shrink < 1,
                    "OptSpaceConfig: backtracking factor must lie in (0, 1)");
    detail::require(step.initial_step > 0 && step.sufficient_decrease > 0 &&
                        step.max_backtracks >= 1,
                    "OptSpaceConfig: invalid line-search parameters");
  }
};

namespace detail {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Minimum-norm solution of the symmetric positive semidefinite system g x = h.
inline Vector psd_min_norm_solve(const DenseMatrix& g, const Vector& h) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(g);
  const Vector& lambda = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
  Vector coeffs = eig.eigenvectors().transpose() * h;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    coeffs(i) = lambda(i) > cutoff ? coeffs(i) / lambda(i) : 0.0;
  return eig.eigenvectors() * coeffs;
}

/// Residual values (X S Y^T)_ij - N_ij over E.
inline std::vector<double> core_residuals(const DenseMatrix& x, const DenseMatrix& s,
                                          const DenseMatrix& y, const SparseObservations& obs) {
  const RowMajorMatrix xs = x * s;
  const RowMajorMatrix yr = y;
  std::vector<double> out(obs.size());
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size(); ++k)
    out[k] = xs.row(entries[k].row).dot(yr.row(entries[k].col)) - entries[k].value;
  return out;
}

inline double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

/// G - X sym(X^T G): projection onto the tangent space of the orthonormal frames at X.
inline DenseMatrix tangent_projection(const DenseMatrix& x, const DenseMatrix& g) {
  const DenseMatrix xg = x.transpose() * g;
  return g - x * (0.5 * (xg + xg.transpose()));
}

}  // namespace detail

/// argmin_S ||P_E(X S Y^T) - P_E(N)||_F over the r^2 core entries. The normal
/// equations are accumulated row by row as sum_i (x_i x_i^T) (x) (sum_j y_j y_j^T);
/// the minimum-norm solution is returned when they are singular.
inline DenseMatrix solve_core_least_squares(const DenseMatrix& x, const DenseMatrix& y,
                                            const SparseObservations& obs) {
  detail::require(x.rows() == obs.rows() && y.rows() == obs.cols() && x.cols() == y.cols(),
                  "solve_core_least_squares: shape mismatch");
  const Eigen::Index r = x.cols();
  const auto r2 = static_cast<std::size_t>(r * r);
  if (r2 > obs.size()) throw InvalidArgument("solve_core_least_squares: underdetermined core");

  const detail::RowMajorMatrix yr = y;
  DenseMatrix gram = DenseMatrix::Zero(r * r, r * r);
  Vector rhs = Vector::Zero(r * r);
  DenseMatrix c(r, r);
  Vector yn(r);
  for (int i = 0; i < obs.rows(); ++i) {
    if (obs.row_count(i) == 0) continue;
    c.setZero();
    yn.setZero();
    for (std::size_t k = obs.row_begin(i); k < obs.row_end(i); ++k) {
      const auto yj = yr.row(obs[k].col).transpose();
      c.noalias() += yj * yj.transpose();
      yn.noalias() += obs[k].value * yj;
    }
    const Vector xi = x.row(i).transpose();
    for (Eigen::Index a = 0; a < r; ++a) {
      for (Eigen::Index b = 0; b < r; ++b)
        gram.block(a * r, b * r, r, r).noalias() += (xi(a) * xi(b)) * c;
      rhs.segment(a * r, r).noalias() += xi(a) * yn;
    }
  }
  const Vector s = detail::psd_min_norm_solve(gram, rhs);
  DenseMatrix core(r, r);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) core(a, b) = s(a * r + b);
  return core;
}

struct ObjectiveGradient {
  double value = 0.0;
  DenseMatrix grad_x;
  DenseMatrix grad_y;
};

/// f = ||P_E(X S Y^T - N)||_F^2 with gradients 2 R Y S^T and 2 R^T X S,
/// each projected onto the tangent space of the orthonormal-frame manifold.
inline ObjectiveGradient objective_and_gradient(const DenseMatrix& x, const DenseMatrix& s,
                                                const DenseMatrix& y,
                                                const SparseObservations& obs) {
  detail::require(x.rows() == obs.rows() && y.rows() == obs.cols() && x.cols() == y.cols() &&
                      s.rows() == x.cols() && s.cols() == x.cols(),
                  "objective_and_gradient: shape mismatch");
  const auto res = detail::core_residuals(x, s, y, obs);
  const detail::RowMajorMatrix yst = y * s.transpose();
  const detail::RowMajorMatrix xs = x * s;
  detail::RowMajorMatrix gx = detail::RowMajorMatrix::Zero(x.rows(), x.cols());
  detail::RowMajorMatrix gy = detail::RowMajorMatrix::Zero(y.rows(), y.cols());
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double rk = 2.0 * res[k];
    gx.row(entries[k].row) += rk * yst.row(entries[k].col);
    gy.row(entries[k].col) += rk * xs.row(entries[k].row);
  }
  return {detail::sum_squares(res), detail::tangent_projection(x, gx),
          detail::tangent_projection(y, gy)};
}

namespace detail {

struct FrameState {
  DenseMatrix x;
  DenseMatrix y;
  DenseMatrix s;
  double value = 0.0;
};

inline FrameState evaluate_frames(DenseMatrix x, DenseMatrix y, const SparseObservations& obs) {
  FrameState st{std::move(x), std::move(y), DenseMatrix(), 0.0};
  st.s = solve_core_least_squares(st.x, st.y, obs);
  st.value = sum_squares(core_residuals(st.x, st.s, st.y, obs));
  return st;
}

/// Gradient descent on (X, Y) with S re-solved at every trial point, Armijo
/// backtracking and QR retraction. Appends to result.objective_trace.
inline FrameState refine_frames(const SparseObservations& obs, DenseMatrix x0, DenseMatrix y0,
                                const OptSpaceConfig& cfg, SolveResult& result) {
  FrameState cur = evaluate_frames(orthonormalize(x0), orthonormalize(y0), obs);
  const double data_norm = frobenius_norm(obs);
  result.objective_trace.push_back(std::sqrt(cur.value));
  double step = cfg.step.initial_step;
  result.stop_reason = "max_iters";
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double resid = std::sqrt(cur.value);
    if (resid <= cfg.grad_tol * data_norm) {
      result.stop_reason = "residual";
      break;
    }
    const ObjectiveGradient og = objective_and_gradient(cur.x, cur.s, cur.y, obs);
    const double g2 = og.grad_x.squaredNorm() + og.grad_y.squaredNorm();
    if (std::sqrt(g2) <= cfg.grad_tol * (1.0 + cur.value)) {
      result.stop_reason = "gradient";
      break;
    }
    bool accepted = false;
    for (int bt = 0; bt < cfg.step.max_backtracks; ++bt) {
      FrameState trial = evaluate_frames(orthonormalize(cur.x - step * og.grad_x),
                                         orthonormalize(cur.y - step * og.grad_y), obs);
      if (trial.value <= cur.value - cfg.step.sufficient_decrease * step * g2) {
        cur = std::move(trial);
        accepted = true;
        break;
      }
      step *= cfg.step.shrink;
    }
    if (!accepted) {
      result.stop_reason = "line_search_stall";
      break;
    }
    ++result.iterations;
    result.objective_trace.push_back(std::sqrt(cur.value));
    step /= cfg.step.shrink;
  }
  return cur;
}

inline FactoredMatrix frames_to_factored(const FrameState& st) {
  return FactoredMatrix(st.x, st.s, st.y);
}

inline void spectral_frames(const SparseObservations& obs, int rank, DenseMatrix& x,
                            DenseMatrix& y) {
  TrimReport tr = trim(obs);
  const SparseObservations& source = tr.trimmed.empty() ? obs : tr.trimmed;
  const FactoredMatrix init = rank_r_projection(source, rank, obs.size());
  x = init.left();
  y = init.right();
}

inline int resolve_rank(const SparseObservations& obs, int requested) {
  const int r = requested > 0 ? requested : estimate_rank(obs);
  require(r <= std::min(obs.rows(), obs.cols()), "OptSpace: rank exceeds min(m, n)");
  return r;
}

}  // namespace detail

/// Trim, rank-r projection of the trimmed observations as the initial frames,
/// then gradient descent on the observed residual.
inline SolveResult optspace_solve(const SparseObservations& obs, const OptSpaceConfig& cfg = {}) {
  cfg.validate();
  detail::require(!obs.empty(), "optspace_solve: no observations");
  detail::Stopwatch clock;
  SolveResult result;
  const int r = detail::resolve_rank(obs, cfg.rank);
  DenseMatrix x, y;
  detail::spectral_frames(obs, r, x, y);
  const auto st = detail::refine_frames(obs, std::move(x), std::move(y), cfg, result);
  result.estimate = detail::frames_to_factored(st);
  result.rank_used = r;
  result.seconds = clock.seconds();
  return result;
}

/// Rank-1 OptSpace, then for k = 2..r: append the leading singular pair of the
/// trimmed current residual to the frames, re-orthonormalize, and refine at rank k.
inline SolveResult incremental_optspace_solve(const SparseObservations& obs,
                                              const OptSpaceConfig& cfg = {}) {
  cfg.validate();
  detail::require(!obs.empty(), "incremental_optspace_solve: no observations");
  detail::Stopwatch clock;
  SolveResult result;
  const int r = detail::resolve_rank(obs, cfg.rank);
  DenseMatrix x, y;
  detail::spectral_frames(obs, 1, x, y);
  auto st = detail::refine_frames(obs, std::move(x), std::move(y), cfg, result);
  for (int k = 2; k <= r; ++k) {
    const auto res = detail::core_residuals(st.x, st.s, st.y, obs);
    std::vector<double> negated(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) negated[i] = -res[i];
    const SparseObservations residual = obs.with_values(negated);
    TrimReport tr = trim(residual);
    const SparseObservations& source = tr.trimmed.empty() ? residual : tr.trimmed;
    const SvdResult lead = truncated_svd(source, 1);
    DenseMatrix xk(st.x.rows(), k);
    DenseMatrix yk(st.y.rows(), k);
    xk << st.x, lead.left;
    yk << st.y, lead.right;
    st = detail::refine_frames(obs, std::move(xk), std::move(yk), cfg, result);
  }
  result.estimate = detail::frames_to_factored(st);
  result.rank_used = r;
  result.seconds = clock.seconds();
  return result;
}

}  // namespace mcomp
