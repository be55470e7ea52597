#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/solve_result.hpp"

namespace mcomp {

/// Proximal map of t ||.||_*: soft-threshold the spectrum of a.
inline DenseMatrix svt_shrink(const DenseMatrix& a, double t) {
  detail::require(t >= 0, "svt_shrink: threshold must be nonnegative");
  if (a.size() == 0) return a;
  Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector shrunk = (svd.singularValues().array() - t).max(0.0).matrix();
  return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

/// mu = sqrt(2 n p) sigma with p = |E| / mn and n the column count.
inline double default_mu(const SparseObservations& obs, double sigma) {
  detail::require(sigma >= 0, "default_mu: sigma must be nonnegative");
  return std::sqrt(2.0 * obs.cols() * obs.density()) * sigma;
}

struct FpcaConfig {
  double mu_target = 1.0;
  double continuation_factor = 0.5;
  double step_tau = 1.9;
  double inner_tol = 1e-8;
  int max_inner = 2000;
  int max_outer = 40;

  /// mu_target from default_mu; sigma = 0 falls back to 1e-8 ||N^E||_2.
  static FpcaConfig for_noise(const SparseObservations& obs, double sigma) {
    FpcaConfig c;
    c.mu_target = sigma > 0 ? default_mu(obs, sigma) : 1e-8 * spectral_norm(obs);
    if (!(c.mu_target > 0)) c.mu_target = 1e-300;
    return c;
  }

  void validate() const {
    detail::require(mu_target > 0, "FpcaConfig: mu_target must be positive");
    detail::require(continuation_factor > 0 && continuation_factor < 1,
                    "FpcaConfig: continuation_factor must lie in (0, 1)");
    detail::require(step_tau > 0 && step_tau < 2, "FpcaConfig: step_tau must lie in (0, 2)");
    detail::require(inner_tol > 0, "FpcaConfig: inner_tol must be positive");
    detail::require(max_inner >= 1 && max_outer >= 1, "FpcaConfig: iteration caps must be positive");
  }
};

namespace detail {

/// Thin SVD form U diag(s) V^T of the current iterate.
struct SpectralIterate {
  DenseMatrix u;
  Vector s;
  DenseMatrix v;

  int rank() const { return static_cast<int>(s.size()); }
  double frobenius() const { return s.norm(); }
  double nuclear() const { return s.sum(); }
};

/// X + tau * R as an operator, R the sparse residual on E.
class ShiftedIterateOperator {
 public:
  ShiftedIterateOperator(const SpectralIterate& x, const Eigen::SparseMatrix<double, Eigen::RowMajor>& r,
                         double tau)
      : x_(&x), r_(&r), tau_(tau) {}
  Eigen::Index rows() const { return r_->rows(); }
  Eigen::Index cols() const { return r_->cols(); }
  DenseMatrix apply(const DenseMatrix& b) const {
    DenseMatrix out(rows(), b.cols());
    if (x_->rank() > 0)
      out.noalias() = x_->u * (x_->s.asDiagonal() * (x_->v.transpose() * b));
    else
      out.setZero();
    const int* outer = r_->outerIndexPtr();
    const int* inner = r_->innerIndexPtr();
    const double* vals = r_->valuePtr();
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const double* bc = b.col(c).data();
      double* oc = out.col(c).data();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        double sum = 0.0;
        for (int p = outer[i]; p < outer[i + 1]; ++p) sum += vals[p] * bc[inner[p]];
        oc[i] += tau_ * sum;
      }
    }
    return out;
  }
  DenseMatrix apply_adjoint(const DenseMatrix& b) const {
    DenseMatrix out(cols(), b.cols());
    if (x_->rank() > 0)
      out.noalias() = x_->v * (x_->s.asDiagonal() * (x_->u.transpose() * b));
    else
      out.setZero();
    const int* outer = r_->outerIndexPtr();
    const int* inner = r_->innerIndexPtr();
    const double* vals = r_->valuePtr();
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const double* bc = b.col(c).data();
      double* oc = out.col(c).data();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        const double bi = tau_ * bc[i];
        for (int p = outer[i]; p < outer[i + 1]; ++p) oc[inner[p]] += vals[p] * bi;
      }
    }
    return out;
  }

 private:
  const SpectralIterate* x_;
  const Eigen::SparseMatrix<double, Eigen::RowMajor>* r_;
  double tau_;
};

inline std::vector<double> iterate_values(const SpectralIterate& x, const SparseObservations& obs) {
  std::vector<double> out(obs.size(), 0.0);
  if (x.rank() == 0) return out;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> us =
      x.u * x.s.asDiagonal();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vr = x.v;
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size(); ++k)
    out[k] = us.row(entries[k].row).dot(vr.row(entries[k].col));
  return out;
}

/// ||A - B||_F for thin SVD forms, without densifying.
inline double difference_norm(const SpectralIterate& a, const SpectralIterate& b) {
  double cross = 0.0;
  if (a.rank() > 0 && b.rank() > 0) {
    const DenseMatrix uu = a.u.transpose() * b.u;
    const DenseMatrix vv = b.v.transpose() * a.v;
    cross = (a.s.asDiagonal() * uu * b.s.asDiagonal() * vv).trace();
  }
  const double sq = a.s.squaredNorm() + b.s.squaredNorm() - 2.0 * cross;
  return std::sqrt(std::max(sq, 0.0));
}

/// Singular triplets of op with value above threshold, shrunk by threshold.
template <LinearOperator Op>
SpectralIterate shrink_operator(const Op& op, double threshold, const SpectralIterate& prev) {
  const int lo = static_cast<int>(std::min(op.rows(), op.cols()));
  int k = std::min(lo, std::max(prev.rank() + 5, 8));
  LanczosOptions opts;
  opts.resolved_below = threshold;
  if (prev.rank() > 0) opts.start = prev.v * Vector::Ones(prev.rank());
  SvdResult s;
  while (true) {
    s = lanczos_svd(op, k, opts);
    if (s.values(k - 1) <= threshold || k == lo) break;
    k = std::min(lo, 2 * k);
  }
  int keep = 0;
  while (keep < s.size() && s.values(keep) > threshold) ++keep;
  return {s.left.leftCols(keep), (s.values.head(keep).array() - threshold).matrix(),
          s.right.leftCols(keep)};
}

}  // namespace detail

/// Fixed-point continuation for min mu ||X||_* + 1/2 ||P_E(X) - P_E(N)||_F^2.
/// mu decreases as max(mu_target, c^k ||N^E||_2); at each mu the iteration
/// X <- shrink(X - tau (P_E(X) - P_E(N)), tau mu) runs until the relative
/// change drops below inner_tol. objective_trace records the composite
/// objective after every inner step.
inline SolveResult fpca_solve(const SparseObservations& obs, const FpcaConfig& cfg) {
  cfg.validate();
  detail::require(!obs.empty(), "fpca_solve: no observations");
  detail::Stopwatch clock;
  SolveResult result;
  const double mu0 = spectral_norm(obs);
  detail::SpectralIterate x{DenseMatrix(obs.rows(), 0), Vector(0), DenseMatrix(obs.cols(), 0)};
  Eigen::SparseMatrix<double, Eigen::RowMajor> residual = obs.sparse();
  result.stop_reason = "max_outer";

  auto refresh_residual = [&](const detail::SpectralIterate& it, double& sq) {
    const auto pred = detail::iterate_values(it, obs);
    double* vals = residual.valuePtr();
    sq = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      vals[k] = obs[k].value - pred[k];
      sq += vals[k] * vals[k];
    }
  };

  double resid_sq = 0.0;
  refresh_residual(x, resid_sq);
  double mu = mu0;
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    mu = std::max(cfg.mu_target, std::pow(cfg.continuation_factor, outer) * mu0);
    const double threshold = cfg.step_tau * mu;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      const detail::ShiftedIterateOperator op(x, residual, cfg.step_tau);
      detail::SpectralIterate next = detail::shrink_operator(op, threshold, x);
      const double change = detail::difference_norm(next, x);
      const double base = x.frobenius();
      x = std::move(next);
      refresh_residual(x, resid_sq);
      ++result.iterations;
      result.objective_trace.push_back(mu * x.nuclear() + 0.5 * resid_sq);
      if (change <= cfg.inner_tol * std::max(base, 1e-300)) break;
    }
    if (mu <= cfg.mu_target) {
      result.stop_reason = "converged";
      break;
    }
  }

  int numerical = 0;
  if (x.rank() > 0)
    while (numerical < x.rank() && x.s(numerical) > 1e-8 * x.s(0)) ++numerical;
  result.rank_used = numerical;
  result.estimate = FactoredMatrix(x.u.leftCols(numerical),
                                   DenseMatrix(x.s.head(numerical).asDiagonal()),
                                   x.v.leftCols(numerical));
  result.seconds = clock.seconds();
  return result;
}

}  // namespace mcomp
