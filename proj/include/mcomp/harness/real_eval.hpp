#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mcomp/admira.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/fpca.hpp"
#include "mcomp/harness/csv.hpp"
#include "mcomp/harness/datasets.hpp"
#include "mcomp/metrics.hpp"
#include "mcomp/optspace.hpp"
#include "mcomp/rng.hpp"
#include "mcomp/spectral.hpp"

namespace mcomp::harness {

/// Solvers accepted by eval_real; "midpoint" predicts (M_min + M_max) / 2 everywhere.
inline const std::vector<std::string>& real_solvers() {
  static const std::vector<std::string> names = {"optspace", "incremental_optspace", "admira",
                                                 "fpca", "midpoint"};
  return names;
}

struct RealEvalOptions {
  std::string solver = "incremental_optspace";
  /// Rank for the rank-aware solvers; 0 estimates it from the training set.
  int rank = 0;
  bool clip = true;
};

struct RealEvalResult {
  std::string solver;
  /// "ok", or "error: <message>".
  std::string status = "ok";
  EvalReport report;
  int rank = 0;
  /// FPCA noise level: standard deviation of the training values / 10 (heuristic).
  std::optional<double> sigma_heuristic;
  std::string stop_reason;

  bool ok() const { return status == "ok"; }
};

inline double sample_std(const SparseObservations& obs) {
  const double n = static_cast<double>(obs.size());
  double mean = 0.0;
  for (const auto& o : obs.entries()) mean += o.value / n;
  double sq = 0.0;
  for (const auto& o : obs.entries()) sq += (o.value - mean) * (o.value - mean);
  return obs.size() > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
}

/// Fits the solver on the training split and scores MAE / NMAE on the test split.
inline RealEvalResult eval_real(const RatingsDataset& ds, const RealEvalOptions& opts) {
  RealEvalResult out;
  out.solver = opts.solver;
  try {
    const auto& train = ds.train;
    const bool rank_aware =
        opts.solver == "optspace" || opts.solver == "incremental_optspace" || opts.solver == "admira";
    if (rank_aware) out.rank = opts.rank > 0 ? opts.rank : estimate_rank(train);
    MaeNmae score;
    std::vector<double> predicted;
    if (opts.solver == "midpoint") {
      const mcomp::detail::Stopwatch clock;
      const double mid = 0.5 * (ds.m_min + ds.m_max);
      const DenseMatrix flat = DenseMatrix::Constant(train.rows(), train.cols(), mid);
      score = mae_nmae(ds.test, flat, ds.m_max, ds.m_min, opts.clip);
      predicted.assign(ds.test.size(), mid);
      out.report.seconds = clock.seconds();
    } else {
      SolveResult res;
      if (opts.solver == "optspace" || opts.solver == "incremental_optspace") {
        OptSpaceConfig oc = OptSpaceConfig::noisy();
        oc.rank = out.rank;
        res = opts.solver == "optspace" ? optspace_solve(train, oc) : incremental_optspace_solve(train, oc);
      } else if (opts.solver == "admira") {
        AdmiraConfig ac;
        ac.rank = out.rank;
        res = admira_solve(train, ac);
      } else if (opts.solver == "fpca") {
        out.sigma_heuristic = sample_std(train) / 10.0;
        res = fpca_solve(train, FpcaConfig::for_noise(train, *out.sigma_heuristic));
        out.rank = res.rank_used;
      } else {
        throw InvalidArgument("unknown solver '" + opts.solver + "'");
      }
      score = mae_nmae(ds.test, res.estimate, ds.m_max, ds.m_min, opts.clip);
      predicted = res.estimate.values_at(ds.test);
      out.report.rank_used = res.rank_used;
      out.report.seconds = res.seconds;
      out.stop_reason = res.stop_reason;
    }
    out.report.mae = score.mae;
    out.report.nmae = score.nmae;
    // RMSE over the held-out ratings; real data has no dense truth.
    double sq = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
      double p = predicted[k];
      if (opts.clip) p = std::clamp(p, ds.m_min, ds.m_max);
      sq += (ds.test[k].value - p) * (ds.test[k].value - p);
    }
    out.report.rmse = std::sqrt(sq / static_cast<double>(ds.test.size()));
  } catch (const std::exception& e) {
    out.status = std::string("error: ") + e.what();
  }
  return out;
}

/// Uniform predictions against uniform truths on [-10, 10].
inline double random_prediction_nmae(std::uint64_t seed, std::size_t pairs) {
  mcomp::detail::require(pairs >= 1, "random_prediction_nmae: pairs must be >= 1");
  Rng rng(derive_seed(seed, "random_baseline"));
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  double total = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double truth = unif(rng);
    const double guess = unif(rng);
    total += std::abs(truth - guess);
  }
  return total / static_cast<double>(pairs) / 20.0;
}

/// Singular values of a dense matrix, descending, truncated to k (0 = all).
inline Vector spectrum_dump(const DenseMatrix& a, int k = 0) {
  mcomp::detail::require(a.size() > 0, "spectrum_dump: empty matrix");
  Vector s = singular_values(a);
  if (k > 0 && k < s.size()) s.conservativeResize(k);
  return s;
}

inline void write_spectrum_csv(std::ostream& out, const Vector& s) {
  write_header(out, {"index", "singular_value"});
  for (Eigen::Index i = 0; i < s.size(); ++i) CsvRow().add(i + 1).add(s(i)).write(out);
}

inline const std::vector<std::string_view>& real_csv_columns() {
  static const std::vector<std::string_view> cols = {
      "dataset", "solver", "users",  "seed",     "status", "rank",  "train_size",
      "test_size", "rmse", "mae",  "nmae",   "seconds", "stop_reason", "sigma_heuristic", "clipped",
      "nmae_std"};
  return cols;
}

inline void write_real_row(std::ostream& out, const RatingsDataset& ds, const RealEvalResult& r,
                           std::optional<std::uint64_t> seed, bool clip, bool timing = true) {
  CsvRow row;
  row.add(ds.name).add(r.solver).add(static_cast<long long>(ds.train.cols()));
  if (seed) row.add(*seed); else row.blank();
  row.add(r.status).add(r.rank).add(ds.train.size()).add(ds.test.size());
  row.add(r.report.rmse).add(r.report.mae).add(r.report.nmae);
  if (timing) row.add(r.report.seconds); else row.blank();
  row.add(r.stop_reason).add(r.sigma_heuristic).add(clip ? 1 : 0).blank();
  row.write(out);
}

/// Mean and sample standard deviation of NMAE over repeated splits.
struct RealSummary {
  int runs_ok = 0;
  double mae_mean = 0.0;
  double nmae_mean = 0.0;
  double nmae_std = 0.0;
  double rmse_mean = 0.0;
};

inline RealSummary summarize_real(const std::vector<RealEvalResult>& runs) {
  RealSummary s;
  std::vector<double> nmae;
  for (const auto& r : runs) {
    if (!r.ok()) continue;
    nmae.push_back(*r.report.nmae);
    s.mae_mean += *r.report.mae;
    s.rmse_mean += r.report.rmse;
  }
  s.runs_ok = static_cast<int>(nmae.size());
  if (nmae.empty()) return s;
  const double k = static_cast<double>(nmae.size());
  s.mae_mean /= k;
  s.rmse_mean /= k;
  for (double v : nmae) s.nmae_mean += v / k;
  double sq = 0.0;
  for (double v : nmae) sq += (v - s.nmae_mean) * (v - s.nmae_mean);
  s.nmae_std = nmae.size() > 1 ? std::sqrt(sq / (k - 1)) : 0.0;
  return s;
}

/// Summary row: status "mean", seed and per-run fields blank.
inline void write_real_mean_row(std::ostream& out, const std::string& dataset,
                                const std::string& solver, long long users,
                                std::size_t train_size, std::size_t test_size,
                                const RealSummary& s, bool clip) {
  CsvRow row;
  row.add(dataset).add(solver).add(users).blank();
  row.add(s.runs_ok > 0 ? "mean" : "error").blank().add(train_size).add(test_size);
  if (s.runs_ok > 0) {
    row.add(s.rmse_mean).add(s.mae_mean).add(s.nmae_mean);
  } else {
    row.blank().blank().blank();
  }
  row.blank().blank().blank().add(clip ? 1 : 0);
  if (s.runs_ok > 0) row.add(s.nmae_std); else row.blank();
  row.write(out);
}

}  // namespace mcomp::harness
