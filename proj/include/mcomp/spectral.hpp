#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"

namespace mcomp {

struct TrimReport {
  SparseObservations trimmed;
  std::vector<int> zeroed_rows;
  std::vector<int> zeroed_cols;
  /// |E| the thresholds 2|E|/n and 2|E|/m were computed from.
  std::size_t reference_size = 0;
};

/// Drops every column with more than 2|E|/n samples, then every row with
/// more than 2|E|/m samples (counted after the column pass). One pass; both
/// thresholds use reference_size, which defaults to the input |E|.
inline TrimReport trim(const SparseObservations& obs, std::size_t reference_size) {
  TrimReport report;
  report.reference_size = reference_size;
  const double col_limit = 2.0 * static_cast<double>(reference_size) / obs.cols();
  const double row_limit = 2.0 * static_cast<double>(reference_size) / obs.rows();

  std::vector<char> col_dropped(static_cast<std::size_t>(obs.cols()), 0);
  for (int j = 0; j < obs.cols(); ++j) {
    if (static_cast<double>(obs.col_count(j)) > col_limit) {
      col_dropped[static_cast<std::size_t>(j)] = 1;
      report.zeroed_cols.push_back(j);
    }
  }
  std::vector<Observation> kept;
  kept.reserve(obs.size());
  for (int i = 0; i < obs.rows(); ++i) {
    std::size_t count = 0;
    for (std::size_t k = obs.row_begin(i); k < obs.row_end(i); ++k)
      if (!col_dropped[static_cast<std::size_t>(obs[k].col)]) ++count;
    if (static_cast<double>(count) > row_limit) {
      report.zeroed_rows.push_back(i);
      continue;
    }
    for (std::size_t k = obs.row_begin(i); k < obs.row_end(i); ++k)
      if (!col_dropped[static_cast<std::size_t>(obs[k].col)]) kept.push_back(obs[k]);
  }
  report.trimmed = SparseObservations(obs.rows(), obs.cols(), std::move(kept));
  return report;
}

inline TrimReport trim(const SparseObservations& obs) { return trim(obs, obs.size()); }

/// P_r(N^E) = (mn/|E|) * sum_{i<=r} sigma_i x_i y_i^T, as a factorization.
inline FactoredMatrix rank_r_projection(const SparseObservations& obs, int r,
                                        std::size_t reference_size = 0) {
  detail::require(!obs.empty(), "rank_r_projection: no observations");
  detail::require(r >= 1 && r <= std::min(obs.rows(), obs.cols()),
                  "rank_r_projection: rank out of range");
  const double e = static_cast<double>(reference_size > 0 ? reference_size : obs.size());
  const double scale = static_cast<double>(obs.rows()) * obs.cols() / e;
  return from_svd(truncated_svd(obs, r), scale);
}

struct RankEstimate {
  int rank = 1;
  /// Cost R(i) for i = 1..costs.size().
  std::vector<double> costs;
  Vector singular_values;
};

/// Number of leading singular values examined by the rank search.
inline constexpr int kRankSearchValues = 51;

/// argmin_i R(i), R(i) = (sigma_{i+1} + sigma_1 sqrt(i sqrt(mn) / |E|)) / sigma_i,
/// computed on the trimmed observations. i ranges over [1, min(50, K)] where K
/// counts singular values above 1e-12 sigma_1; sigma_{i+1} beyond the computed
/// spectrum is 0. Ties go to the smallest i.
inline RankEstimate estimate_rank_detailed(const SparseObservations& obs) {
  detail::require(!obs.empty(), "estimate_rank: no observations");
  const TrimReport tr = trim(obs);
  RankEstimate out;
  if (tr.trimmed.empty()) throw InvalidArgument("estimate_rank: empty spectrum");
  const int lo = std::min(obs.rows(), obs.cols());
  const int want = std::min(kRankSearchValues, lo);
  const SvdResult s = truncated_svd(tr.trimmed, want);
  out.singular_values = s.values;
  const double sigma1 = s.values(0);
  if (!(sigma1 > 0)) throw InvalidArgument("estimate_rank: empty spectrum");
  int k_count = 0;
  while (k_count < s.size() && s.values(k_count) > 1e-12 * sigma1) ++k_count;
  const int imax = std::min(kRankSearchValues - 1, k_count);
  const double e = static_cast<double>(obs.size());
  const double root_mn = std::sqrt(static_cast<double>(obs.rows()) * obs.cols());
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= imax; ++i) {
    const double next = i < s.size() ? s.values(i) : 0.0;
    const double cost = (next + sigma1 * std::sqrt(i * root_mn / e)) / s.values(i - 1);
    out.costs.push_back(cost);
    if (cost < best) {
      best = cost;
      out.rank = i;
    }
  }
  return out;
}

inline int estimate_rank(const SparseObservations& obs) {
  return estimate_rank_detailed(obs).rank;
}

}  // namespace mcomp
