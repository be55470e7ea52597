#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "mcomp/admira.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/datagen.hpp"
#include "mcomp/fpca.hpp"
#include "mcomp/harness/config.hpp"
#include "mcomp/harness/csv.hpp"
#include "mcomp/metrics.hpp"
#include "mcomp/optspace.hpp"
#include "mcomp/rng.hpp"
#include "mcomp/spectral.hpp"

namespace mcomp::harness {

inline constexpr int kSweepSchemaVersion = 1;

/// Realized SNR may deviate from the target by this relative amount before the
/// row is flagged.
inline double calibration_tolerance(NoiseKind kind) {
  return kind == NoiseKind::quantization ? 0.02 : 0.10;
}

struct SweepRecord {
  std::size_t grid_index = 0;
  double epsilon = 0.0;
  double target_snr = kInfiniteSnr;
  int trial = 0;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::optspace;
  /// "ok", or "error: <message>".
  std::string status = "ok";
  double rmse = std::numeric_limits<double>::quiet_NaN();
  int rank_estimated = -1;
  int rank_used = 0;
  int iterations = 0;
  std::optional<double> seconds;
  std::string stop_reason;
  double realized_snr = kInfiniteSnr;
  std::size_t realized_e_size = 0;
  std::optional<double> quantization_a;
  double oracle_rmse = 0.0;
  double bound_convex = 0.0;
  double bound_optspace = 0.0;
  bool calibration_warning = false;

  bool ok() const { return status == "ok"; }
};

struct GridPoint {
  double epsilon;
  double snr;
};

/// Grid points in emission order: epsilon-major, then SNR.
inline std::vector<GridPoint> grid_points(const SweepConfig& cfg) {
  std::vector<GridPoint> out;
  for (double e : cfg.epsilon_grid)
    for (double s : cfg.snr_grid) out.push_back({e, s});
  return out;
}

inline std::uint64_t instance_seed(std::uint64_t master, std::size_t grid_index, int trial) {
  return derive_seed(derive_seed(master, "grid", grid_index), "trial",
                     static_cast<std::uint64_t>(trial));
}

namespace detail {

struct InstanceContext {
  ProblemInstance inst;
  int rank_estimated = -1;
  std::string rank_error;
  double realized_snr = kInfiniteSnr;
  double oracle_rmse = 0.0;
  double bound_convex = 0.0;
  double bound_optspace = 0.0;
  bool calibration_warning = false;
};

inline InstanceContext prepare_instance(const SweepConfig& cfg, const GridPoint& gp,
                                        std::uint64_t seed) {
  InstanceSpec spec;
  spec.model = cfg.model;
  spec.m = cfg.m;
  spec.n = cfg.n;
  spec.r = cfg.r;
  spec.epsilon = gp.epsilon;
  spec.noise = std::isinf(gp.snr) ? NoiseSpec::noiseless() : NoiseSpec::make(cfg.noise, gp.snr);

  InstanceContext ctx;
  ctx.inst = make_instance(spec, seed);
  const auto& obs = ctx.inst.observations;
  if (obs.empty()) {
    ctx.rank_error = "no observations";
    return ctx;
  }
  try {
    ctx.rank_estimated = estimate_rank(obs);
  } catch (const std::exception& e) {
    ctx.rank_error = e.what();
  }
  ctx.realized_snr = measure_snr(ctx.inst.truth, obs);
  if (std::isfinite(gp.snr))
    ctx.calibration_warning = !(std::abs(ctx.realized_snr / gp.snr - 1.0) <=
                                calibration_tolerance(cfg.noise));

  ctx.oracle_rmse = oracle_rmse(ctx.inst.noise.sigma, cfg.n, ctx.inst.rank, gp.epsilon);
  std::vector<double> z(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k)
    z[k] = obs[k].value - ctx.inst.truth(obs[k].row, obs[k].col);
  const SparseObservations noise = obs.with_values(z);
  const double z_frob = frobenius_norm(noise);
  const double z_spec = z_frob > 0 ? truncated_svd(noise, 1).values(0) : 0.0;
  const double alpha = static_cast<double>(cfg.m) / cfg.n;
  const double e_size = static_cast<double>(obs.size());
  ctx.bound_convex = bound_convex_relaxation(z_frob, cfg.n, alpha, e_size);
  Eigen::JacobiSVD<DenseMatrix> core(ctx.inst.factors.core());
  const auto& sv = core.singularValues();
  const double kappa = sv(0) / sv(sv.size() - 1);
  ctx.bound_optspace = bound_optspace(z_spec, cfg.n, alpha, ctx.inst.rank, kappa, e_size);
  return ctx;
}

inline SweepRecord run_solver(const SweepConfig& cfg, const InstanceContext& ctx,
                              SolverKind solver) {
  SweepRecord rec;
  rec.solver = solver;
  const auto& inst = ctx.inst;
  const auto& obs = inst.observations;
  const bool noiseless = inst.noise.kind == NoiseKind::none;
  try {
    if (obs.empty()) throw InvalidArgument("no observations");
    const bool needs_rank = solver != SolverKind::fpca && solver != SolverKind::oracle;
    int rank = inst.rank;
    if (needs_rank && cfg.rank_mode == RankMode::estimated) {
      if (ctx.rank_estimated < 1) throw InvalidArgument("rank estimation failed: " + ctx.rank_error);
      rank = ctx.rank_estimated;
    }
    SolveResult res;
    switch (solver) {
      case SolverKind::optspace:
      case SolverKind::incremental_optspace: {
        OptSpaceConfig oc =
            noiseless ? cfg.settings.optspace_noiseless : cfg.settings.optspace_noisy;
        oc.rank = rank;
        res = solver == SolverKind::optspace ? optspace_solve(obs, oc)
                                             : incremental_optspace_solve(obs, oc);
        break;
      }
      case SolverKind::admira: {
        AdmiraConfig ac = cfg.settings.admira;
        ac.rank = rank;
        res = admira_solve(obs, ac);
        break;
      }
      case SolverKind::fpca: {
        FpcaConfig fc = cfg.settings.fpca;
        fc.mu_target = FpcaConfig::for_noise(obs, inst.noise.sigma).mu_target;
        res = fpca_solve(obs, fc);
        break;
      }
      case SolverKind::rank_r_projection: {
        const mcomp::detail::Stopwatch clock;
        res.estimate = rank_r_projection(obs, rank);
        res.rank_used = rank;
        res.stop_reason = "closed_form";
        res.seconds = clock.seconds();
        break;
      }
      case SolverKind::oracle: {
        const mcomp::detail::Stopwatch clock;
        const OracleFit fit = oracle_fit(obs, inst.factors.left(), inst.factors.right());
        res.seconds = clock.seconds();
        res.iterations = fit.iterations;
        res.rank_used = inst.rank;
        res.stop_reason = fit.converged ? "converged" : "max_iters";
        rec.rmse = mcomp::rmse(inst.truth, fit.estimate);
        break;
      }
    }
    if (solver != SolverKind::oracle) rec.rmse = mcomp::rmse(inst.truth, res.estimate);
    rec.rank_used = res.rank_used;
    rec.iterations = res.iterations;
    rec.stop_reason = res.stop_reason;
    if (cfg.timing) rec.seconds = res.seconds;
  } catch (const std::exception& e) {
    rec.status = std::string("error: ") + e.what();
    rec.rmse = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace detail

/// All records of one (grid point, trial) task, in the config's solver order.
inline std::vector<SweepRecord> run_trial(const SweepConfig& cfg, std::size_t grid_index,
                                          const GridPoint& gp, int trial) {
  const std::uint64_t seed = instance_seed(cfg.master_seed, grid_index, trial);
  std::vector<SweepRecord> out;
  detail::InstanceContext ctx;
  std::string setup_error;
  try {
    ctx = detail::prepare_instance(cfg, gp, seed);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  for (auto solver : cfg.solvers) {
    SweepRecord rec;
    if (setup_error.empty()) {
      rec = detail::run_solver(cfg, ctx, solver);
    } else {
      rec.solver = solver;
      rec.status = "error: instance: " + setup_error;
    }
    rec.grid_index = grid_index;
    rec.epsilon = gp.epsilon;
    rec.target_snr = gp.snr;
    rec.trial = trial;
    rec.seed = seed;
    if (setup_error.empty()) {
      rec.rank_estimated = ctx.rank_estimated;
      rec.realized_snr = ctx.realized_snr;
      rec.realized_e_size = ctx.inst.observations.size();
      if (ctx.inst.noise.kind == NoiseKind::quantization) rec.quantization_a = ctx.inst.noise.parameter;
      rec.oracle_rmse = ctx.oracle_rmse;
      rec.bound_convex = ctx.bound_convex;
      rec.bound_optspace = ctx.bound_optspace;
      rec.calibration_warning = ctx.calibration_warning;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct SweepOptions {
  /// Worker threads; 0 uses the hardware concurrency.
  int jobs = 1;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs every (grid point, trial) task on a pool of worker threads. Records
/// are returned ordered by grid point, trial and solver regardless of the
/// number of workers.
inline std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepOptions& opts = {}) {
  cfg.validate();
  const auto points = grid_points(cfg);
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t total = points.size() * trials;
  std::vector<std::vector<SweepRecord>> slots(total);

  unsigned workers = opts.jobs > 0 ? static_cast<unsigned>(opts.jobs)
                                   : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto work = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t g = task / trials;
      const int t = static_cast<int>(task % trials);
      slots[task] = run_trial(cfg, g, points[g], t);
      const std::size_t finished = ++done;
      if (opts.progress) {
        std::lock_guard lock(progress_mutex);
        opts.progress(finished, total);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<SweepRecord> out;
  out.reserve(total * cfg.solvers.size());
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

/// Mean over the successful trials of one (grid point, solver).
struct SweepSummary {
  std::size_t grid_index = 0;
  double epsilon = 0.0;
  double target_snr = kInfiniteSnr;
  SolverKind solver = SolverKind::optspace;
  int trials_ok = 0;
  int trials_total = 0;
  double rmse_mean = std::numeric_limits<double>::quiet_NaN();
  double rmse_std = std::numeric_limits<double>::quiet_NaN();
  double rank_estimated_mean = 0.0;
  double rank_used_mean = 0.0;
  double iterations_mean = 0.0;
  std::optional<double> seconds_mean;
  double realized_snr_mean = 0.0;
  double realized_e_size_mean = 0.0;
  std::optional<double> quantization_a_mean;
  double oracle_rmse_mean = 0.0;
  double bound_convex_mean = 0.0;
  double bound_optspace_mean = 0.0;
  int calibration_warnings = 0;
};

inline std::vector<SweepSummary> summarize(const SweepConfig& cfg,
                                           const std::vector<SweepRecord>& records) {
  const auto points = grid_points(cfg);
  std::vector<SweepSummary> out;
  for (std::size_t g = 0; g < points.size(); ++g) {
    for (auto solver : cfg.solvers) {
      SweepSummary s;
      s.grid_index = g;
      s.epsilon = points[g].epsilon;
      s.target_snr = points[g].snr;
      s.solver = solver;
      std::vector<const SweepRecord*> ok;
      for (const auto& r : records) {
        if (r.grid_index != g || r.solver != solver) continue;
        ++s.trials_total;
        if (r.calibration_warning) ++s.calibration_warnings;
        if (r.ok()) ok.push_back(&r);
      }
      s.trials_ok = static_cast<int>(ok.size());
      if (!ok.empty()) {
        const double k = static_cast<double>(ok.size());
        double sum = 0, sq = 0, secs = 0, qa = 0;
        bool timed = true, quant = true;
        for (const auto* r : ok) {
          sum += r->rmse;
          s.rank_estimated_mean += r->rank_estimated / k;
          s.rank_used_mean += r->rank_used / k;
          s.iterations_mean += r->iterations / k;
          s.realized_snr_mean += r->realized_snr / k;
          s.realized_e_size_mean += static_cast<double>(r->realized_e_size) / k;
          s.oracle_rmse_mean += r->oracle_rmse / k;
          s.bound_convex_mean += r->bound_convex / k;
          s.bound_optspace_mean += r->bound_optspace / k;
          if (r->seconds) secs += *r->seconds; else timed = false;
          if (r->quantization_a) qa += *r->quantization_a; else quant = false;
        }
        s.rmse_mean = sum / k;
        for (const auto* r : ok) sq += (r->rmse - s.rmse_mean) * (r->rmse - s.rmse_mean);
        s.rmse_std = ok.size() > 1 ? std::sqrt(sq / (k - 1)) : 0.0;
        if (timed) s.seconds_mean = secs / k;
        if (quant) s.quantization_a_mean = qa / k;
      }
      out.push_back(s);
    }
  }
  return out;
}

inline const std::vector<std::string_view>& sweep_csv_columns() {
  static const std::vector<std::string_view> cols = {
      "schema",        "row_type",       "name",           "model",
      "m",             "n",              "r",              "noise",
      "epsilon",       "target_snr",     "trial",          "seed",
      "solver",        "status",         "rmse",           "rmse_std",
      "trials_ok",     "rank_estimated", "rank_used",      "iterations",
      "seconds",       "stop_reason",    "realized_snr",   "realized_E_size",
      "quantization_a", "oracle_rmse",   "bound_convex",   "bound_optspace",
      "calibration_warning"};
  return cols;
}

namespace detail {

inline void add_coordinates(CsvRow& row, const SweepConfig& cfg, std::string_view type,
                            double epsilon, double snr) {
  row.add(kSweepSchemaVersion).add(type).add(cfg.name).add(to_string(cfg.model));
  row.add(cfg.m).add(cfg.n).add(cfg.r);
  row.add(std::isinf(snr) ? std::string_view("none") : to_string(cfg.noise));
  row.add(epsilon).add(snr);
}

}  // namespace detail

/// Trial rows of each grid point followed by that grid point's mean rows.
inline void write_sweep_csv(std::ostream& out, const SweepConfig& cfg,
                            const std::vector<SweepRecord>& records) {
  write_header(out, sweep_csv_columns());
  const auto summaries = summarize(cfg, records);
  const auto points = grid_points(cfg);
  for (std::size_t g = 0; g < points.size(); ++g) {
    for (const auto& r : records) {
      if (r.grid_index != g) continue;
      CsvRow row;
      detail::add_coordinates(row, cfg, "trial", r.epsilon, r.target_snr);
      row.add(r.trial).add(r.seed).add(to_string(r.solver)).add(r.status);
      if (r.ok()) row.add(r.rmse); else row.blank();
      row.blank().blank();
      row.add(r.rank_estimated).add(r.rank_used).add(r.iterations).add(r.seconds).add(r.stop_reason);
      row.add(r.realized_snr).add(r.realized_e_size).add(r.quantization_a);
      row.add(r.oracle_rmse).add(r.bound_convex).add(r.bound_optspace);
      row.add(r.calibration_warning ? 1 : 0);
      row.write(out);
    }
    for (const auto& s : summaries) {
      if (s.grid_index != g) continue;
      CsvRow row;
      detail::add_coordinates(row, cfg, "mean", s.epsilon, s.target_snr);
      row.blank().blank().add(to_string(s.solver)).add(s.trials_ok > 0 ? "ok" : "error");
      if (s.trials_ok > 0) {
        row.add(s.rmse_mean).add(s.rmse_std).add(s.trials_ok);
        row.add(s.rank_estimated_mean).add(s.rank_used_mean).add(s.iterations_mean);
        row.add(s.seconds_mean).blank();
        row.add(s.realized_snr_mean).add(s.realized_e_size_mean).add(s.quantization_a_mean);
        row.add(s.oracle_rmse_mean).add(s.bound_convex_mean).add(s.bound_optspace_mean);
      } else {
        row.blank().blank().add(0);
        for (int i = 0; i < 11; ++i) row.blank();
      }
      row.add(s.calibration_warnings);
      row.write(out);
    }
  }
}

}  // namespace mcomp::harness
