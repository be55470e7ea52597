#pragma once

#include <cmath>
#include <vector>

#include <Eigen/QR>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"

namespace mcomp {

/// P_E(A): the entries of A at the cells of E.
inline SparseObservations project_observed(const DenseMatrix& a, const SparseObservations& e) {
  detail::require(a.rows() == e.rows() && a.cols() == e.cols(),
                  "project_observed: dimension mismatch");
  std::vector<double> values;
  values.reserve(e.size());
  for (const auto& obs : e.entries()) values.push_back(a(obs.row, obs.col));
  return e.with_values(values);
}

inline double frobenius_norm(const DenseMatrix& a) { return a.norm(); }

/// Norm over the stored entries only.
inline double frobenius_norm(const SparseObservations& obs) {
  double sum = 0.0;
  for (const auto& e : obs.entries()) sum += e.value * e.value;
  return std::sqrt(sum);
}

inline double spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

inline double spectral_norm(const SparseObservations& obs) {
  if (obs.empty()) return 0.0;
  return truncated_svd(obs, 1).values(0);
}

inline DenseMatrix factored_to_dense(const FactoredMatrix& f) {
  if (f.rank() == 0) return DenseMatrix::Zero(f.rows(), f.cols());
  return f.left() * f.core() * f.right().transpose();
}

/// ||P_E(left * core * right^T) - P_E(N)||_F without forming the m x n product.
inline double residual_on_observed(const FactoredMatrix& f, const SparseObservations& obs) {
  detail::require(f.rows() == obs.rows() && f.cols() == obs.cols(),
                  "residual_on_observed: dimension mismatch");
  const auto predicted = f.values_at(obs);
  double sum = 0.0;
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double d = predicted[k] - entries[k].value;
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// Thin Q factor of a with the sign of each column chosen so R has a nonnegative diagonal.
inline DenseMatrix orthonormalize(const DenseMatrix& a) {
  detail::require(a.rows() >= a.cols(), "orthonormalize: more columns than rows");
  Eigen::HouseholderQR<DenseMatrix> qr(a);
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(a.rows(), a.cols());
  const DenseMatrix& r = qr.matrixQR();
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    if (r(c, c) < 0) q.col(c) *= -1.0;
  return q;
}

/// Orthonormal factorization of a product a * b^T (a: m x r, b: n x r).
inline FactoredMatrix factorize_product(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.cols() == b.cols(), "factorize_product: rank mismatch");
  Eigen::HouseholderQR<DenseMatrix> qa(a);
  Eigen::HouseholderQR<DenseMatrix> qb(b);
  const auto r = a.cols();
  DenseMatrix left = qa.householderQ() * DenseMatrix::Identity(a.rows(), r);
  DenseMatrix right = qb.householderQ() * DenseMatrix::Identity(b.rows(), r);
  const DenseMatrix ra = qa.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const DenseMatrix rb = qb.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return FactoredMatrix(std::move(left), ra * rb.transpose(), std::move(right));
}

/// Rank-r factorization from SVD triplets: core = diag(values) * scale.
inline FactoredMatrix from_svd(const SvdResult& s, double scale = 1.0) {
  return FactoredMatrix(s.left, DenseMatrix((s.values * scale).asDiagonal()), s.right);
}

}  // namespace mcomp
