#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/types.hpp"

namespace mcomp {

/// Leading singular triplets: values descending, vectors as columns.
struct SvdResult {
  Vector values;
  DenseMatrix left;
  DenseMatrix right;

  int size() const noexcept { return static_cast<int>(values.size()); }
};

/// Anything that can apply A and A^T to a block of vectors.
template <class Op>
concept LinearOperator = requires(const Op& op, const DenseMatrix& x) {
  { op.rows() } -> std::convertible_to<Eigen::Index>;
  { op.cols() } -> std::convertible_to<Eigen::Index>;
  { op.apply(x) } -> std::convertible_to<DenseMatrix>;
  { op.apply_adjoint(x) } -> std::convertible_to<DenseMatrix>;
};

/// The zero-filled observation matrix N^E as an operator.
class ObservedOperator {
 public:
  explicit ObservedOperator(const SparseObservations& obs) : obs_(&obs) {}
  Eigen::Index rows() const { return obs_->rows(); }
  Eigen::Index cols() const { return obs_->cols(); }
  DenseMatrix apply(const DenseMatrix& x) const { return obs_->times(x); }
  DenseMatrix apply_adjoint(const DenseMatrix& x) const { return obs_->transpose_times(x); }

 private:
  const SparseObservations* obs_;
};

class DenseOperator {
 public:
  explicit DenseOperator(const DenseMatrix& a) : a_(&a) {}
  Eigen::Index rows() const { return a_->rows(); }
  Eigen::Index cols() const { return a_->cols(); }
  DenseMatrix apply(const DenseMatrix& x) const { return *a_ * x; }
  DenseMatrix apply_adjoint(const DenseMatrix& x) const { return a_->transpose() * x; }

 private:
  const DenseMatrix* a_;
};

template <LinearOperator Op>
class TransposedOperator {
 public:
  explicit TransposedOperator(const Op& op) : op_(&op) {}
  Eigen::Index rows() const { return op_->cols(); }
  Eigen::Index cols() const { return op_->rows(); }
  DenseMatrix apply(const DenseMatrix& x) const { return op_->apply_adjoint(x); }
  DenseMatrix apply_adjoint(const DenseMatrix& x) const { return op_->apply(x); }

 private:
  const Op* op_;
};

namespace detail {

/// First entry of each left vector with magnitude above 1e-12 is made positive.
inline void canonicalize_signs(SvdResult& s) {
  for (Eigen::Index c = 0; c < s.left.cols(); ++c) {
    for (Eigen::Index i = 0; i < s.left.rows(); ++i) {
      const double x = s.left(i, c);
      if (std::abs(x) > 1e-12) {
        if (x < 0) {
          s.left.col(c) *= -1.0;
          s.right.col(c) *= -1.0;
        }
        break;
      }
    }
  }
}

inline DenseMatrix random_block(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

/// Classical Gram-Schmidt applied twice against the first `count` columns of basis.
inline void orthogonalize_against(Vector& w, const DenseMatrix& basis, Eigen::Index count) {
  if (count == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector coeffs = basis.leftCols(count).transpose() * w;
    w.noalias() -= basis.leftCols(count) * coeffs;
  }
}

/// Unit vector orthogonal to the first `count` columns of basis, or empty when none exists.
inline bool random_orthogonal_unit(Vector& out, const DenseMatrix& basis, Eigen::Index count,
                                   std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    Vector w = random_block(basis.rows(), 1, rng).col(0);
    orthogonalize_against(w, basis, count);
    const double nw = w.norm();
    if (nw > 1e-8) {
      out = w / nw;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Dense SVD truncated to the leading k triplets.
inline SvdResult truncated_svd(const DenseMatrix& a, int k) {
  const auto lo = std::min(a.rows(), a.cols());
  if (k < 1 || k > lo)
    throw InvalidArgument("truncated_svd: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(lo) + "]");
  Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out{svd.singularValues().head(k), svd.matrixU().leftCols(k),
                svd.matrixV().leftCols(k)};
  detail::canonicalize_signs(out);
  return out;
}

/// All singular values of a dense matrix, descending.
inline Vector singular_values(const DenseMatrix& a) {
  Eigen::BDCSVD<DenseMatrix> svd(a);
  return svd.singularValues();
}

struct LanczosOptions {
  /// Ritz residual bound relative to the largest singular value.
  double tol = 1e-8;
  /// Bidiagonalization step cap; 0 means the full dimension (always exact).
  int max_steps = 0;
  /// Ritz pairs whose value plus residual bound is at most this count as
  /// resolved without reaching tol; their values are only upper bounds.
  double resolved_below = -1.0;
  std::uint64_t seed = 0x6d636f6d70ULL;
  /// Starting direction in the domain (column space) of the operator; a
  /// random vector is used when empty or zero.
  Vector start;
};

namespace detail {

/// Bidiagonalization for rows >= cols.
template <LinearOperator Op>
SvdResult lanczos_tall(const Op& op, int k, const LanczosOptions& opts) {
  const Eigen::Index m = op.rows();
  const Eigen::Index n = op.cols();

  const Eigen::Index full = n;
  const Eigen::Index cap = opts.max_steps > 0 ? std::min<Eigen::Index>(opts.max_steps, full) : full;
  std::mt19937_64 rng(opts.seed);

  Eigen::Index capacity = std::min<Eigen::Index>(full, std::max<Eigen::Index>(2 * k + 16, 32));
  DenseMatrix vbasis(n, capacity + 1);
  DenseMatrix ubasis(m, capacity);
  Vector alpha(capacity);
  Vector beta(capacity);

  auto grow = [&](Eigen::Index needed) {
    if (needed <= capacity) return;
    const Eigen::Index next = std::min<Eigen::Index>(full, std::max(needed, 2 * capacity));
    vbasis.conservativeResize(Eigen::NoChange, next + 1);
    ubasis.conservativeResize(Eigen::NoChange, next);
    alpha.conservativeResize(next);
    beta.conservativeResize(next);
    capacity = next;
  };

  {
    Vector v0 = detail::random_block(n, 1, rng).col(0);
    if (opts.start.size() == n && opts.start.norm() > 0) v0 = opts.start;
    vbasis.col(0) = v0 / v0.norm();
  }
  double scale = 0.0;
  auto breakdown = [&](double x) { return x <= 1e-14 * std::max(scale, 1e-300); };

  Eigen::Index steps = 0;
  Eigen::Index next_check = std::min<Eigen::Index>(cap, k + 2);
  Eigen::BDCSVD<DenseMatrix> small;
  bool converged = false;

  while (true) {
    const Eigen::Index j = steps;
    grow(j + 1);
    // u_j = A v_j - beta_{j-1} u_{j-1}
    Vector u = op.apply(DenseMatrix(vbasis.col(j))).col(0);
    if (j > 0) u -= beta(j - 1) * ubasis.col(j - 1);
    detail::orthogonalize_against(u, ubasis, j);
    double a = u.norm();
    scale = std::max(scale, a);
    if (breakdown(a)) {
      a = 0.0;
      Vector fresh;
      if (!detail::random_orthogonal_unit(fresh, ubasis, j, rng)) fresh = Vector::Zero(m);
      ubasis.col(j) = fresh;
    } else {
      ubasis.col(j) = u / a;
    }
    alpha(j) = a;

    // v_{j+1} = A^T u_j - alpha_j v_j
    Vector w = op.apply_adjoint(DenseMatrix(ubasis.col(j))).col(0) - a * vbasis.col(j);
    detail::orthogonalize_against(w, vbasis, j + 1);
    double b = w.norm();
    scale = std::max(scale, b);
    steps = j + 1;
    const bool at_full = steps == full;
    if (at_full || breakdown(b)) {
      b = 0.0;
      Vector fresh;
      if (at_full || !detail::random_orthogonal_unit(fresh, vbasis, steps, rng))
        fresh = Vector::Zero(n);
      vbasis.col(steps) = fresh;
    } else {
      vbasis.col(steps) = w / b;
    }
    beta(j) = b;

    if (steps >= k && (steps >= next_check || steps == cap)) {
      DenseMatrix bmat = DenseMatrix::Zero(steps, steps);
      for (Eigen::Index i = 0; i < steps; ++i) {
        bmat(i, i) = alpha(i);
        if (i + 1 < steps) bmat(i, i + 1) = beta(i);
      }
      small.compute(bmat, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector& sv = small.singularValues();
      const double sigma1 = sv(0);
      converged = at_full || b == 0.0;
      if (!converged) {
        converged = true;
        for (int i = 0; i < k; ++i) {
          const double res = b * std::abs(small.matrixU()(steps - 1, i));
          if (sv(i) + res <= opts.resolved_below) break;
          if (res > opts.tol * std::max(sigma1, 1e-300)) {
            converged = false;
            break;
          }
        }
      }
      if (converged) {
        SvdResult out;
        out.values = sv.head(k);
        out.left = ubasis.leftCols(steps) * small.matrixU().leftCols(k);
        out.right = vbasis.leftCols(steps) * small.matrixV().leftCols(k);
        detail::canonicalize_signs(out);
        return out;
      }
      if (steps == cap)
        throw ConvergenceError("lanczos_svd: Ritz residuals above tolerance",
                               static_cast<int>(steps));
      next_check = std::min<Eigen::Index>(
          cap, std::max<Eigen::Index>(steps + 2, static_cast<Eigen::Index>(1.1 * steps)));
    }
  }
}

}  // namespace detail

/// Leading k singular triplets of an operator via Golub-Kahan-Lanczos
/// bidiagonalization with full reorthogonalization. The Krylov basis is
/// extended until every wanted Ritz pair has residual <= tol * sigma_1; at
/// full dimension the decomposition is exact.
template <LinearOperator Op>
SvdResult lanczos_svd(const Op& op, int k, const LanczosOptions& opts = {}) {
  const Eigen::Index lo = std::min(op.rows(), op.cols());
  if (k < 1 || k > lo)
    throw InvalidArgument("lanczos_svd: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(lo) + "]");
  if (op.rows() >= op.cols()) return detail::lanczos_tall(op, k, opts);
  LanczosOptions topts = opts;
  if (opts.start.size() == op.cols()) topts.start = op.apply(DenseMatrix(opts.start)).col(0);
  SvdResult s = detail::lanczos_tall(TransposedOperator<Op>(op), k, topts);
  std::swap(s.left, s.right);
  detail::canonicalize_signs(s);
  return s;
}

/// Leading k triplets of the zero-filled observation matrix.
inline SvdResult truncated_svd(const SparseObservations& obs, int k,
                               const LanczosOptions& opts = {}) {
  return lanczos_svd(ObservedOperator(obs), k, opts);
}

}  // namespace mcomp
