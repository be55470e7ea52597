#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/QR>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/solve_result.hpp"

namespace mcomp {

/// Rank-one atoms u_k v_k^T stored as unit-norm columns, with weights.
struct AtomSet {
  DenseMatrix left;
  DenseMatrix right;
  Vector weights;

  int size() const noexcept { return static_cast<int>(left.cols()); }
};

/// Weights minimizing ||sum_k w_k P_E(u_k v_k^T) - P_E(N)||_F. Dependent
/// atoms are absorbed by a rank-revealing factorization, giving the
/// minimum-norm solution.
inline Vector atom_least_squares(const AtomSet& atoms, const SparseObservations& obs) {
  detail::require(atoms.size() >= 1, "atom_least_squares: no atoms");
  detail::require(atoms.left.rows() == obs.rows() && atoms.right.rows() == obs.cols() &&
                      atoms.right.cols() == atoms.left.cols(),
                  "atom_least_squares: shape mismatch");
  const auto count = atoms.size();
  if (obs.empty()) return Vector::Zero(count);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lr = atoms.left;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rr = atoms.right;
  DenseMatrix design(static_cast<Eigen::Index>(obs.size()), count);
  Vector target(static_cast<Eigen::Index>(obs.size()));
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    design.row(row) = lr.row(entries[k].row).cwiseProduct(rr.row(entries[k].col));
    target(row) = entries[k].value;
  }
  Eigen::CompleteOrthogonalDecomposition<DenseMatrix> cod(design);
  cod.setThreshold(1e-10);
  return cod.solve(target);
}

struct AdmiraConfig {
  int rank = 1;
  int max_iters = 100;
  /// Stop once the relative observed residual, or its relative decrease, falls below tol.
  double tol = 1e-4;

  void validate() const {
    detail::require(rank >= 1, "AdmiraConfig: rank must be >= 1");
    detail::require(max_iters >= 1, "AdmiraConfig: max_iters must be positive");
    detail::require(tol > 0, "AdmiraConfig: tol must be positive");
  }
};

namespace detail {

inline double residual_norm(const FactoredMatrix& x, const SparseObservations& obs) {
  return x.rank() == 0 ? frobenius_norm(obs) : residual_on_observed(x, obs);
}

/// Best rank-r approximation of sum_k w_k u_k v_k^T, via QR of the atom
/// bases and an SVD of the small K x K middle factor.
inline FactoredMatrix truncate_atoms(const AtomSet& atoms, int r) {
  const Eigen::HouseholderQR<DenseMatrix> qu(atoms.left);
  const Eigen::HouseholderQR<DenseMatrix> qv(atoms.right);
  const auto count = atoms.left.cols();
  const DenseMatrix ru = qu.matrixQR().topRows(count).triangularView<Eigen::Upper>();
  const DenseMatrix rv = qv.matrixQR().topRows(count).triangularView<Eigen::Upper>();
  const DenseMatrix middle = ru * atoms.weights.asDiagonal() * rv.transpose();
  Eigen::JacobiSVD<DenseMatrix> svd(middle, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const int keep = std::min<int>(r, static_cast<int>(count));
  const DenseMatrix bu = qu.householderQ() * DenseMatrix::Identity(atoms.left.rows(), count);
  const DenseMatrix bv = qv.householderQ() * DenseMatrix::Identity(atoms.right.rows(), count);
  return FactoredMatrix(bu * svd.matrixU().leftCols(keep),
                        DenseMatrix(svd.singularValues().head(keep).asDiagonal()),
                        bv * svd.matrixV().leftCols(keep));
}

}  // namespace detail

/// CoSaMP-style greedy solver for min ||P_E(X) - P_E(N)||_F s.t. rank(X) <= r.
/// Each iteration merges the 2r leading singular pairs of the observed residual
/// with the current r atoms, refits all weights on E, and truncates back to
/// rank r. A step that increases the residual ends the solve with the best
/// iterate.
inline SolveResult admira_solve(const SparseObservations& obs, const AdmiraConfig& cfg) {
  cfg.validate();
  detail::require(!obs.empty(), "admira_solve: no observations");
  const int lo = std::min(obs.rows(), obs.cols());
  detail::require(cfg.rank <= lo, "admira_solve: rank exceeds min(m, n)");
  detail::Stopwatch clock;
  SolveResult result;
  result.rank_used = cfg.rank;

  FactoredMatrix best = FactoredMatrix::zero(obs.rows(), obs.cols());
  const double data_norm = frobenius_norm(obs);
  double best_resid = data_norm;
  result.objective_trace.push_back(best_resid);
  result.stop_reason = "max_iters";
  if (data_norm == 0.0) {
    result.stop_reason = "residual";
    result.estimate = best;
  }

  const int candidates = std::min(2 * cfg.rank, lo);
  std::vector<double> resid_values(obs.size());
  for (int it = 0; it < cfg.max_iters && data_norm > 0.0; ++it) {
    const auto predicted = best.values_at(obs);
    for (std::size_t k = 0; k < obs.size(); ++k) resid_values[k] = obs[k].value - predicted[k];
    const SparseObservations residual = obs.with_values(resid_values);
    const SvdResult cand = truncated_svd(residual, candidates);

    AtomSet atoms;
    const int current = best.rank();
    const int total = std::min(current + candidates, lo);
    const int taken = total - current;
    atoms.left.resize(obs.rows(), total);
    atoms.right.resize(obs.cols(), total);
    if (current > 0) {
      atoms.left.leftCols(current) = best.left();
      atoms.right.leftCols(current) = best.right();
    }
    atoms.left.rightCols(taken) = cand.left.leftCols(taken);
    atoms.right.rightCols(taken) = cand.right.leftCols(taken);
    atoms.weights = atom_least_squares(atoms, obs);

    FactoredMatrix next = detail::truncate_atoms(atoms, cfg.rank);
    const double resid = detail::residual_norm(next, obs);
    ++result.iterations;
    if (resid > best_resid * (1.0 + 1e-12)) {
      result.stop_reason = "residual_increase";
      break;
    }
    const double decrease = best_resid - resid;
    best = std::move(next);
    best_resid = resid;
    result.objective_trace.push_back(resid);
    if (resid <= cfg.tol * data_norm) {
      result.stop_reason = "residual";
      break;
    }
    if (decrease <= cfg.tol * (resid + decrease)) {
      result.stop_reason = "stall";
      break;
    }
  }
  result.estimate = std::move(best);
  result.seconds = clock.seconds();
  return result;
}

}  // namespace mcomp
