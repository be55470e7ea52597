#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/admira.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/datagen.hpp"
#include "mcomp/fpca.hpp"
#include "mcomp/optspace.hpp"

namespace mcomp::harness {

enum class SolverKind { optspace, incremental_optspace, admira, fpca, rank_r_projection, oracle };

inline constexpr SolverKind kAllSolvers[] = {
    SolverKind::optspace, SolverKind::incremental_optspace, SolverKind::admira,
    SolverKind::fpca,     SolverKind::rank_r_projection,    SolverKind::oracle};

inline std::string_view to_string(SolverKind s) {
  switch (s) {
    case SolverKind::optspace: return "optspace";
    case SolverKind::incremental_optspace: return "incremental_optspace";
    case SolverKind::admira: return "admira";
    case SolverKind::fpca: return "fpca";
    case SolverKind::rank_r_projection: return "rank_r_projection";
    case SolverKind::oracle: return "oracle";
  }
  return "?";
}

inline SolverKind parse_solver(std::string_view name) {
  for (auto s : kAllSolvers)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown solver '" + std::string(name) + "'");
}

/// Which rank the rank-aware solvers receive: the estimate from the
/// observations or the generating rank.
enum class RankMode { estimated, true_rank };

/// Per-solver settings a config file may override. max_iters etc. of OptSpace
/// apply to both OptSpace variants.
struct SolverSettings {
  OptSpaceConfig optspace_noiseless = OptSpaceConfig::noiseless();
  OptSpaceConfig optspace_noisy = OptSpaceConfig::noisy();
  AdmiraConfig admira;
  FpcaConfig fpca;
};

struct SweepConfig {
  std::string name = "sweep";
  MatrixModel model = MatrixModel::standard;
  int m = 500;
  int n = 500;
  int r = 4;
  std::vector<double> epsilon_grid;
  /// Target SNRs; infinity means noiseless.
  std::vector<double> snr_grid;
  NoiseKind noise = NoiseKind::standard_gaussian;
  std::vector<SolverKind> solvers;
  int trials = 10;
  std::uint64_t master_seed = 1;
  RankMode rank_mode = RankMode::estimated;
  /// When false the seconds column is left blank so reruns are byte-identical.
  bool timing = true;
  SolverSettings settings;

  void validate() const {
    if (m < 1 || n < 1) throw ConfigError("m and n must be positive");
    if (r < 1 || r > std::min(m, n)) throw ConfigError("r must lie in [1, min(m, n)]");
    if (model == MatrixModel::ill_conditioned && (m != n || r != 4))
      throw ConfigError("ill_conditioned model needs m == n and r == 4");
    if (epsilon_grid.empty()) throw ConfigError("epsilon_grid is empty");
    if (snr_grid.empty()) throw ConfigError("snr grid is empty");
    if (solvers.empty()) throw ConfigError("solvers is empty");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    for (double e : epsilon_grid)
      if (!(e > 0 && e <= n)) throw ConfigError("epsilon values must lie in (0, n]");
    for (double s : snr_grid) {
      if (!(s > 0)) throw ConfigError("SNR values must be positive");
      if (noise == NoiseKind::none && std::isfinite(s))
        throw ConfigError("noise 'none' allows only infinite SNR");
    }
    try {
      settings.optspace_noiseless.validate();
      settings.optspace_noisy.validate();
      settings.admira.validate();
      FpcaConfig probe = settings.fpca;
      probe.mu_target = 1.0;
      probe.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

inline double snr_value(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kInfiniteSnr;
    throw ConfigError("SNR entries must be numbers or \"inf\", got \"" + s + "\"");
  }
  if (!v.is_number()) throw ConfigError("SNR entries must be numbers or \"inf\"");
  return v.get<double>();
}

template <class T>
T get_as(const json& obj, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

inline void read_optspace(const json& j, OptSpaceConfig& c) {
  check_keys(j, {"max_iters", "grad_tol"}, "optspace");
  if (j.contains("max_iters")) c.max_iters = get_as<int>(j, "max_iters");
  if (j.contains("grad_tol")) c.grad_tol = get_as<double>(j, "grad_tol");
}

}  // namespace detail

/// Parses the JSON sweep description. Keys:
///   name, model ("standard" | "ill_conditioned"), m, n, r, epsilon_grid,
///   snr_grid (numbers or "inf") or inv_sqrt_snr_grid (x -> SNR = 1/x^2, 0 = noiseless),
///   noise ("none" | "standard" | "multiplicative" | "outlier" | "quantization"),
///   solvers, trials, master_seed, rank_mode ("estimated" | "true"), timing,
///   and optional blocks optspace {max_iters, grad_tol}, admira {max_iters, tol},
///   fpca {step_tau, continuation_factor, inner_tol, max_inner, max_outer}.
inline SweepConfig parse_sweep_config(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  detail::check_keys(j,
                     {"name", "model", "m", "n", "r", "epsilon_grid", "snr_grid",
                      "inv_sqrt_snr_grid", "noise", "solvers", "trials", "master_seed",
                      "rank_mode", "timing", "optspace", "admira", "fpca"},
                     "sweep config");
  SweepConfig c;
  if (j.contains("name")) c.name = detail::get_as<std::string>(j, "name");
  try {
    if (j.contains("model")) c.model = parse_matrix_model(detail::get_as<std::string>(j, "model"));
    if (j.contains("noise")) c.noise = parse_noise_kind(detail::get_as<std::string>(j, "noise"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("m")) c.m = detail::get_as<int>(j, "m");
  if (j.contains("n")) c.n = detail::get_as<int>(j, "n");
  if (j.contains("r")) c.r = detail::get_as<int>(j, "r");
  if (!j.contains("epsilon_grid")) throw ConfigError("missing epsilon_grid");
  c.epsilon_grid = detail::get_as<std::vector<double>>(j, "epsilon_grid");

  const bool plain = j.contains("snr_grid");
  const bool inverse = j.contains("inv_sqrt_snr_grid");
  if (plain == inverse) throw ConfigError("give exactly one of snr_grid, inv_sqrt_snr_grid");
  if (plain) {
    if (!j["snr_grid"].is_array()) throw ConfigError("snr_grid must be an array");
    for (const auto& v : j["snr_grid"]) c.snr_grid.push_back(detail::snr_value(v));
  } else {
    for (double x : detail::get_as<std::vector<double>>(j, "inv_sqrt_snr_grid")) {
      if (x < 0) throw ConfigError("inv_sqrt_snr_grid values must be >= 0");
      c.snr_grid.push_back(x == 0 ? kInfiniteSnr : 1.0 / (x * x));
    }
  }

  if (!j.contains("solvers")) throw ConfigError("missing solvers");
  for (const auto& s : detail::get_as<std::vector<std::string>>(j, "solvers")) {
    const SolverKind k = parse_solver(s);
    for (auto prev : c.solvers)
      if (prev == k) throw ConfigError("solver '" + s + "' listed twice");
    c.solvers.push_back(k);
  }
  if (j.contains("trials")) c.trials = detail::get_as<int>(j, "trials");
  if (j.contains("master_seed")) c.master_seed = detail::get_as<std::uint64_t>(j, "master_seed");
  if (j.contains("rank_mode")) {
    const auto mode = detail::get_as<std::string>(j, "rank_mode");
    if (mode == "estimated") c.rank_mode = RankMode::estimated;
    else if (mode == "true") c.rank_mode = RankMode::true_rank;
    else throw ConfigError("rank_mode must be \"estimated\" or \"true\"");
  }
  if (j.contains("timing")) c.timing = detail::get_as<bool>(j, "timing");

  if (j.contains("optspace")) {
    detail::read_optspace(j["optspace"], c.settings.optspace_noiseless);
    detail::read_optspace(j["optspace"], c.settings.optspace_noisy);
  }
  if (j.contains("admira")) {
    const auto& a = j["admira"];
    detail::check_keys(a, {"max_iters", "tol"}, "admira");
    if (a.contains("max_iters")) c.settings.admira.max_iters = detail::get_as<int>(a, "max_iters");
    if (a.contains("tol")) c.settings.admira.tol = detail::get_as<double>(a, "tol");
  }
  if (j.contains("fpca")) {
    const auto& f = j["fpca"];
    detail::check_keys(f, {"step_tau", "continuation_factor", "inner_tol", "max_inner", "max_outer"},
                       "fpca");
    auto& fc = c.settings.fpca;
    if (f.contains("step_tau")) fc.step_tau = detail::get_as<double>(f, "step_tau");
    if (f.contains("continuation_factor"))
      fc.continuation_factor = detail::get_as<double>(f, "continuation_factor");
    if (f.contains("inner_tol")) fc.inner_tol = detail::get_as<double>(f, "inner_tol");
    if (f.contains("max_inner")) fc.max_inner = detail::get_as<int>(f, "max_inner");
    if (f.contains("max_outer")) fc.max_outer = detail::get_as<int>(f, "max_outer");
  }
  c.validate();
  return c;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sweep_config(ss.str());
}

}  // namespace mcomp::harness
