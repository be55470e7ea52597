#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/rng.hpp"

namespace mcomp {

enum class NoiseKind { none, standard_gaussian, multiplicative, outlier, quantization };

inline std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::standard_gaussian: return "standard_gaussian";
    case NoiseKind::multiplicative: return "multiplicative";
    case NoiseKind::outlier: return "outlier";
    case NoiseKind::quantization: return "quantization";
  }
  return "unknown";
}

inline NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::none;
  if (name == "standard_gaussian" || name == "standard") return NoiseKind::standard_gaussian;
  if (name == "multiplicative") return NoiseKind::multiplicative;
  if (name == "outlier") return NoiseKind::outlier;
  if (name == "quantization") return NoiseKind::quantization;
  throw InvalidArgument("unknown noise kind '" + std::string(name) + "'");
}

inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

/// Declarative noise model; per-kind parameters are resolved at realization.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double target_snr = kInfiniteSnr;

  static NoiseSpec noiseless() { return {}; }

  static NoiseSpec make(NoiseKind kind, double target_snr) {
    NoiseSpec s{kind, target_snr};
    s.validate();
    return s;
  }

  void validate() const {
    detail::require(target_snr > 0 && !std::isnan(target_snr), "NoiseSpec: target_snr must be > 0");
    if (kind == NoiseKind::none)
      detail::require(std::isinf(target_snr), "NoiseSpec: kind none requires infinite SNR");
    if (kind == NoiseKind::quantization)
      detail::require(std::isfinite(target_snr),
                      "NoiseSpec: quantization always injects noise; SNR must be finite");
  }
};

/// Noise parameters as realized on an instance.
struct RealizedNoise {
  NoiseKind kind = NoiseKind::none;
  double target_snr = kInfiniteSnr;
  /// Root-mean-square noise per entry implied by the target, sqrt(signal_power / SNR).
  double sigma = 0.0;
  /// Kind-specific parameter: gaussian sigma, std of xi, outlier magnitude a, or quantization step a.
  double parameter = 0.0;
};

/// Ground truth with its orthonormal factorization.
struct LowRankTruth {
  DenseMatrix matrix;
  FactoredMatrix factors;
};

namespace detail {

inline DenseMatrix gaussian_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

}  // namespace detail

/// M = U V^T with i.i.d. N(0,1) factor entries (U drawn first, row-major, then V).
inline LowRankTruth gen_gaussian_lowrank(int m, int n, int r, std::uint64_t seed) {
  detail::require(m > 0 && n > 0 && r > 0, "gen_gaussian_lowrank: sizes must be positive");
  detail::require(r <= std::min(m, n), "gen_gaussian_lowrank: rank exceeds min(m, n)");
  Rng rng(seed);
  const DenseMatrix u = detail::gaussian_matrix(m, r, rng);
  const DenseMatrix v = detail::gaussian_matrix(n, r, rng);
  return {u * v.transpose(), factorize_product(u, v)};
}

/// Scale applied to the core diag(1,4,7,10) so E||M||_F^2 matches the standard rank-4 model.
inline double ill_conditioned_scale() { return std::sqrt(4.0 / 166.0); }

/// M = sqrt(4/166) U diag(1,4,7,10) V^T, n x n, condition number 10.
inline LowRankTruth gen_ill_conditioned(int n, std::uint64_t seed) {
  detail::require(n >= 4, "gen_ill_conditioned: n must be at least 4");
  Rng rng(seed);
  const DenseMatrix u = detail::gaussian_matrix(n, 4, rng);
  const DenseMatrix v = detail::gaussian_matrix(n, 4, rng);
  Vector core(4);
  core << 1.0, 4.0, 7.0, 10.0;
  const DenseMatrix scaled_u = u * (ill_conditioned_scale() * core).asDiagonal();
  return {scaled_u * v.transpose(), factorize_product(scaled_u, v)};
}

/// Each cell revealed independently with probability epsilon / n.
inline IndexSet sample_uniform(int m, int n, double epsilon, std::uint64_t seed) {
  detail::require(m > 0 && n > 0, "sample_uniform: sizes must be positive");
  detail::require(epsilon >= 0 && epsilon <= n,
                  "sample_uniform: epsilon must lie in [0, n]");
  const double p = epsilon / n;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  IndexSet out;
  out.reserve(static_cast<std::size_t>(m * epsilon * 1.1) + 16);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (unif(rng) < p) out.push_back({i, j});
  return out;
}

/// Nearest point of the grid {(k + 1/2) a}; exact midpoints round toward +infinity.
inline double quantize(double x, double step) {
  return (std::floor(x / step) + 0.5) * step;
}

namespace detail {

inline double quantization_noise_ratio(const DenseMatrix& m, const IndexSet& cells, double step) {
  double signal = 0.0;
  double noise = 0.0;
  for (const auto& c : cells) {
    const double x = m(c.row, c.col);
    const double z = quantize(x, step) - x;
    signal += x * x;
    noise += z * z;
  }
  return noise / signal;
}

}  // namespace detail

/// Quantization step a whose realized noise-to-signal ratio over E is
/// 1/target_snr, found by bisection on [1e-6 s, 10 s], s = max |M_ij| over E.
/// The realized ratio is continuous in a, so a sign change brackets a root.
inline double calibrate_quantization_step(const DenseMatrix& m, const IndexSet& cells,
                                          double target_snr) {
  detail::require(std::isfinite(target_snr) && target_snr > 0,
                  "calibrate_quantization_step: target SNR must be finite and positive");
  detail::require(!cells.empty(), "calibrate_quantization_step: empty index set");
  double s = 0.0;
  for (const auto& c : cells) s = std::max(s, std::abs(m(c.row, c.col)));
  detail::require(s > 0, "calibrate_quantization_step: matrix is zero on E");
  const double goal = 1.0 / target_snr;
  double lo = 1e-6 * s;
  double hi = 10.0 * s;
  const double f_lo = detail::quantization_noise_ratio(m, cells, lo) - goal;
  const double f_hi = detail::quantization_noise_ratio(m, cells, hi) - goal;
  if (f_lo > 0 || f_hi < 0) {
    const double snr_max = 1.0 / (f_lo + goal);
    const double snr_min = 1.0 / (f_hi + goal);
    throw InvalidArgument("calibrate_quantization_step: target SNR " + std::to_string(target_snr) +
                          " outside achievable range [" + std::to_string(snr_min) + ", " +
                          std::to_string(snr_max) + "]");
  }
  double mid = 0.5 * (lo + hi);
  for (int step = 0; step < 60; ++step) {
    mid = 0.5 * (lo + hi);
    const double f = detail::quantization_noise_ratio(m, cells, mid) - goal;
    if (std::abs(f) <= 1e-4 * goal) break;
    (f < 0 ? lo : hi) = mid;
  }
  return mid;
}

/// N_ij = M_ij + Z_ij on E. signal_power is E[M_ij^2] of the generating
/// model, used to turn the target SNR into per-kind parameters:
///   standard:       sigma^2 = P / SNR
///   multiplicative: Z = xi * M, Var(xi) = 1 / SNR
///   outlier:        Z in {+a, -a, 0} w.p. 1/200, 1/200, 99/100, a = sqrt(100 P / SNR)
///   quantization:   Z = q(M) - M with the step calibrated on this instance.
inline SparseObservations apply_noise(const DenseMatrix& m, const IndexSet& cells,
                                      const NoiseSpec& spec, double signal_power,
                                      std::uint64_t seed, RealizedNoise* realized = nullptr) {
  spec.validate();
  detail::require(signal_power > 0, "apply_noise: signal power must be positive");
  for (const auto& c : cells)
    detail::require(c.row >= 0 && c.row < m.rows() && c.col >= 0 && c.col < m.cols(),
                    "apply_noise: index outside matrix");
  RealizedNoise info{spec.kind, spec.target_snr, 0.0, 0.0};
  if (spec.kind != NoiseKind::none) info.sigma = std::sqrt(signal_power / spec.target_snr);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> values;
  values.reserve(cells.size());

  switch (spec.kind) {
    case NoiseKind::none:
      for (const auto& c : cells) values.push_back(m(c.row, c.col));
      break;
    case NoiseKind::standard_gaussian:
      info.parameter = info.sigma;
      for (const auto& c : cells) values.push_back(m(c.row, c.col) + info.sigma * normal(rng));
      break;
    case NoiseKind::multiplicative: {
      const double xi_std = std::sqrt(1.0 / spec.target_snr);
      info.parameter = xi_std;
      for (const auto& c : cells) {
        const double x = m(c.row, c.col);
        values.push_back(x + xi_std * normal(rng) * x);
      }
      break;
    }
    case NoiseKind::outlier: {
      const double a = std::sqrt(100.0 * signal_power / spec.target_snr);
      info.parameter = a;
      for (const auto& c : cells) {
        const double u = unif(rng);
        const double z = u < 0.005 ? a : (u < 0.01 ? -a : 0.0);
        values.push_back(m(c.row, c.col) + z);
      }
      break;
    }
    case NoiseKind::quantization: {
      const double step = calibrate_quantization_step(m, cells, spec.target_snr);
      info.parameter = step;
      for (const auto& c : cells) values.push_back(quantize(m(c.row, c.col), step));
      break;
    }
  }
  if (realized) *realized = info;
  return SparseObservations::from_cells(static_cast<int>(m.rows()), static_cast<int>(m.cols()),
                                        cells, values);
}

/// Empirical SNR on E: sum M^2 / sum (N - M)^2; infinity when noiseless.
inline double measure_snr(const DenseMatrix& m, const SparseObservations& obs) {
  detail::require(m.rows() == obs.rows() && m.cols() == obs.cols(),
                  "measure_snr: dimension mismatch");
  detail::require(!obs.empty(), "measure_snr: empty observation set");
  double signal = 0.0;
  double noise = 0.0;
  for (const auto& e : obs.entries()) {
    const double x = m(e.row, e.col);
    signal += x * x;
    noise += (e.value - x) * (e.value - x);
  }
  if (noise == 0.0) return kInfiniteSnr;
  return signal / noise;
}

enum class MatrixModel { standard, ill_conditioned };

inline std::string_view to_string(MatrixModel model) {
  return model == MatrixModel::standard ? "standard" : "ill_conditioned";
}

inline MatrixModel parse_matrix_model(std::string_view name) {
  if (name == "standard") return MatrixModel::standard;
  if (name == "ill_conditioned") return MatrixModel::ill_conditioned;
  throw InvalidArgument("unknown matrix model '" + std::string(name) + "'");
}

struct InstanceSpec {
  MatrixModel model = MatrixModel::standard;
  int m = 500;
  int n = 500;
  int r = 4;
  double epsilon = 40.0;
  NoiseSpec noise;
};

/// A realized problem: truth, its factors, and the noisy observations on E.
struct ProblemInstance {
  DenseMatrix truth;
  FactoredMatrix factors;
  int rank = 0;
  SparseObservations observations;
  RealizedNoise noise;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
};

/// Matrix, sampling and noise draw from independent sub-streams of seed.
inline ProblemInstance make_instance(const InstanceSpec& spec, std::uint64_t seed) {
  LowRankTruth truth;
  int rank = spec.r;
  if (spec.model == MatrixModel::standard) {
    truth = gen_gaussian_lowrank(spec.m, spec.n, spec.r, derive_seed(seed, "matrix"));
  } else {
    detail::require(spec.m == spec.n, "make_instance: ill-conditioned model requires m == n");
    detail::require(spec.r == 4, "make_instance: ill-conditioned model has rank 4");
    truth = gen_ill_conditioned(spec.n, derive_seed(seed, "matrix"));
    rank = 4;
  }
  const IndexSet cells = sample_uniform(spec.m, spec.n, spec.epsilon, derive_seed(seed, "sampling"));
  // Both generators have E[M_ij^2] = r.
  const double signal_power = static_cast<double>(rank);
  ProblemInstance out;
  out.observations = apply_noise(truth.matrix, cells, spec.noise, signal_power,
                                 derive_seed(seed, "noise"), &out.noise);
  out.truth = std::move(truth.matrix);
  out.factors = std::move(truth.factors);
  out.rank = rank;
  out.seed = seed;
  out.epsilon = spec.epsilon;
  return out;
}

}  // namespace mcomp
