#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mcomp/core/errors.hpp"

namespace mcomp {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A matrix position (row, col).
struct Cell {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Observed index set E, sorted row-major without duplicates.
using IndexSet = std::vector<Cell>;

struct Observation {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// The observed entries N^E of an m x n matrix.
///
/// Entries are stored sorted row-major, so the entries of row i are the
/// contiguous range [row_begin(i), row_begin(i+1)). A column adjacency
/// (entry ids grouped by column) and a compressed sparse copy are built once
/// at construction for the solvers' products. Construction rejects
/// out-of-range indices, duplicate cells and non-finite values.
class SparseObservations {
 public:
  SparseObservations() = default;

  SparseObservations(int rows, int cols, std::vector<Observation> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    detail::require(rows > 0 && cols > 0, "SparseObservations: dimensions must be positive");
    for (const auto& e : entries_) {
      if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_)
        throw InvalidArgument("SparseObservations: index (" + std::to_string(e.row) + "," +
                              std::to_string(e.col) + ") out of range");
      if (!std::isfinite(e.value))
        throw InvalidArgument("SparseObservations: non-finite value at (" +
                              std::to_string(e.row) + "," + std::to_string(e.col) + ")");
    }
    std::sort(entries_.begin(), entries_.end(), [](const Observation& a, const Observation& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 1; k < entries_.size(); ++k) {
      if (entries_[k].row == entries_[k - 1].row && entries_[k].col == entries_[k - 1].col)
        throw InvalidArgument("SparseObservations: duplicate cell (" +
                              std::to_string(entries_[k].row) + "," +
                              std::to_string(entries_[k].col) + ")");
    }
    build_index();
  }

  /// Pairs an index set with aligned values.
  static SparseObservations from_cells(int rows, int cols, const IndexSet& cells,
                                       std::span<const double> values) {
    detail::require(cells.size() == values.size(),
                    "SparseObservations: cell and value counts differ");
    std::vector<Observation> entries;
    entries.reserve(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k)
      entries.push_back({cells[k].row, cells[k].col, values[k]});
    return SparseObservations(rows, cols, std::move(entries));
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Sampling fraction p = |E| / mn.
  double density() const noexcept {
    return static_cast<double>(entries_.size()) /
           (static_cast<double>(rows_) * static_cast<double>(cols_));
  }

  std::span<const Observation> entries() const noexcept { return entries_; }
  const Observation& operator[](std::size_t k) const { return entries_[k]; }

  std::size_t row_begin(int i) const { return row_ptr_[static_cast<std::size_t>(i)]; }
  std::size_t row_end(int i) const { return row_ptr_[static_cast<std::size_t>(i) + 1]; }
  std::size_t row_count(int i) const { return row_end(i) - row_begin(i); }

  /// Entry ids (into entries()) of column j.
  std::span<const std::size_t> col_entries(int j) const {
    auto b = col_ptr_[static_cast<std::size_t>(j)];
    auto e = col_ptr_[static_cast<std::size_t>(j) + 1];
    return std::span<const std::size_t>(col_ids_).subspan(b, e - b);
  }
  std::size_t col_count(int j) const { return col_entries(j).size(); }

  IndexSet cells() const {
    IndexSet out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.row, e.col});
    return out;
  }

  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value);
    return out;
  }

  /// Same index set, new values (aligned with entries()).
  SparseObservations with_values(std::span<const double> values) const {
    detail::require(values.size() == entries_.size(),
                    "SparseObservations::with_values: size mismatch");
    SparseObservations out = *this;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!std::isfinite(values[k]))
        throw InvalidArgument("SparseObservations::with_values: non-finite value");
      out.entries_[k].value = values[k];
    }
    out.build_sparse();
    return out;
  }

  /// Zero-filled m x n matrix N^E.
  DenseMatrix to_dense() const {
    DenseMatrix out = DenseMatrix::Zero(rows_, cols_);
    for (const auto& e : entries_) out(e.row, e.col) = e.value;
    return out;
  }

  /// N^E * B
  DenseMatrix times(const DenseMatrix& b) const {
    detail::require(b.rows() == cols_, "SparseObservations::times: dimension mismatch");
    return sparse_ * b;
  }

  /// (N^E)^T * B
  DenseMatrix transpose_times(const DenseMatrix& b) const {
    detail::require(b.rows() == rows_, "SparseObservations::transpose_times: dimension mismatch");
    return sparse_.transpose() * b;
  }

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& sparse() const noexcept { return sparse_; }

 private:
  void build_index() {
    row_ptr_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    std::vector<std::size_t> col_counts(static_cast<std::size_t>(cols_) + 1, 0);
    for (const auto& e : entries_) {
      ++row_ptr_[static_cast<std::size_t>(e.row) + 1];
      ++col_counts[static_cast<std::size_t>(e.col) + 1];
    }
    for (std::size_t i = 1; i < row_ptr_.size(); ++i) row_ptr_[i] += row_ptr_[i - 1];
    for (std::size_t j = 1; j < col_counts.size(); ++j) col_counts[j] += col_counts[j - 1];
    col_ptr_ = col_counts;
    col_ids_.resize(entries_.size());
    std::vector<std::size_t> fill(col_counts.begin(), col_counts.end() - 1);
    for (std::size_t k = 0; k < entries_.size(); ++k)
      col_ids_[fill[static_cast<std::size_t>(entries_[k].col)]++] = k;
    build_sparse();
  }

  void build_sparse() {
    sparse_.resize(rows_, cols_);
    sparse_.resizeNonZeros(0);
    sparse_.reserve(static_cast<Eigen::Index>(entries_.size()));
    int current = 0;
    sparse_.startVec(0);
    for (const auto& e : entries_) {
      while (current < e.row) sparse_.startVec(++current);
      sparse_.insertBack(e.row, e.col) = e.value;
    }
    sparse_.finalize();
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Observation> entries_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::size_t> col_ids_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> sparse_;
};

/// Rank-r matrix left * core * right^T with orthonormal left/right bases.
///
/// Rank 0 is allowed and represents the zero matrix.
class FactoredMatrix {
 public:
  static constexpr double kOrthonormalityTol = 1e-10;

  FactoredMatrix() = default;

  FactoredMatrix(DenseMatrix left, DenseMatrix core, DenseMatrix right)
      : left_(std::move(left)), core_(std::move(core)), right_(std::move(right)) {
    const auto r = left_.cols();
    detail::require(right_.cols() == r && core_.rows() == r && core_.cols() == r,
                    "FactoredMatrix: inconsistent factor ranks");
    detail::require(left_.rows() > 0 && right_.rows() > 0,
                    "FactoredMatrix: dimensions must be positive");
    detail::require(core_.allFinite() && left_.allFinite() && right_.allFinite(),
                    "FactoredMatrix: non-finite factor entries");
    if (r > 0) {
      const DenseMatrix eye = DenseMatrix::Identity(r, r);
      detail::require((left_.transpose() * left_ - eye).cwiseAbs().maxCoeff() <= kOrthonormalityTol,
                      "FactoredMatrix: left factor is not orthonormal");
      detail::require(
          (right_.transpose() * right_ - eye).cwiseAbs().maxCoeff() <= kOrthonormalityTol,
          "FactoredMatrix: right factor is not orthonormal");
    }
  }

  static FactoredMatrix zero(int rows, int cols) {
    return FactoredMatrix(DenseMatrix(rows, 0), DenseMatrix(0, 0), DenseMatrix(cols, 0));
  }

  int rows() const noexcept { return static_cast<int>(left_.rows()); }
  int cols() const noexcept { return static_cast<int>(right_.rows()); }
  int rank() const noexcept { return static_cast<int>(left_.cols()); }

  const DenseMatrix& left() const noexcept { return left_; }
  const DenseMatrix& core() const noexcept { return core_; }
  const DenseMatrix& right() const noexcept { return right_; }

  double entry(int i, int j) const {
    if (rank() == 0) return 0.0;
    return left_.row(i).dot(core_ * right_.row(j).transpose());
  }

  /// Predictions at every observed cell, aligned with obs.entries().
  std::vector<double> values_at(const SparseObservations& obs) const {
    detail::require(obs.rows() == rows() && obs.cols() == cols(),
                    "FactoredMatrix::values_at: dimension mismatch");
    std::vector<double> out(obs.size(), 0.0);
    if (rank() == 0) return out;
    const DenseMatrix lc = left_ * core_;
    const auto entries = obs.entries();
    for (std::size_t k = 0; k < entries.size(); ++k)
      out[k] = lc.row(entries[k].row).dot(right_.row(entries[k].col));
    return out;
  }

 private:
  DenseMatrix left_;
  DenseMatrix core_;
  DenseMatrix right_;
};

}  // namespace mcomp
