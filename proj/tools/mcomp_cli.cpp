// mcomp: sweep experiments, real-data evaluation, spectra and the random baseline.
// Exit status: 0 success, 1 configuration or usage error, 2 data error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcomp/mcomp.hpp"

namespace {

using namespace mcomp;
using namespace mcomp::harness;

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

struct SweepArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  int trials = 0;
  bool no_timing = false;
  bool quiet = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  SweepConfig cfg = load_sweep_config(a.config);
  if (a.seed_set) cfg.master_seed = a.seed;
  if (a.trials > 0) cfg.trials = a.trials;
  if (a.no_timing) cfg.timing = false;
  cfg.validate();
  auto out = open_output(a.out);
  SweepOptions opts;
  opts.jobs = a.jobs;
  if (!a.quiet)
    opts.progress = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu tasks", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    };
  const auto records = run_sweep(cfg, opts);
  write_sweep_csv(out, cfg, records);
  std::size_t failed = 0, flagged = 0;
  for (const auto& r : records) {
    failed += r.ok() ? 0 : 1;
    flagged += r.calibration_warning ? 1 : 0;
  }
  if (failed) std::fprintf(stderr, "warning: %zu solver runs failed (see status column)\n", failed);
  if (flagged)
    std::fprintf(stderr, "warning: %zu rows missed the target SNR (calibration_warning)\n", flagged);
  return 0;
}

struct RealArgs {
  std::string dataset;
  std::string path;
  std::string solver;
  int users = 1000;
  std::uint64_t seed = 1;
  int repeats = 0;
  int rank = 0;
  bool no_clip = false;
  bool no_timing = false;
  std::string out;
};

int run_real_cmd(const RealArgs& a) {
  std::vector<std::string> solvers;
  if (a.solver == "all") {
    solvers = real_solvers();
  } else {
    bool known = false;
    for (const auto& s : real_solvers()) known = known || s == a.solver;
    if (!known) throw ConfigError("unknown solver '" + a.solver + "'");
    solvers = {a.solver};
  }
  RealEvalOptions opts;
  opts.rank = a.rank;
  opts.clip = !a.no_clip;
  auto out = open_output(a.out);
  write_header(out, real_csv_columns());

  if (a.dataset == "movielens") {
    const RatingsDataset ds = load_movielens(a.path);
    for (const auto& s : solvers) {
      opts.solver = s;
      const auto res = eval_real(ds, opts);
      write_real_row(out, ds, res, std::nullopt, opts.clip, !a.no_timing);
      if (!res.ok()) std::fprintf(stderr, "%s: %s\n", s.c_str(), res.status.c_str());
    }
    return 0;
  }
  if (a.dataset != "jester") throw ConfigError("--dataset must be jester or movielens");
  if (a.users < 1) throw ConfigError("--users must be positive");
  const int repeats = a.repeats > 0 ? a.repeats : 5;
  const auto rows = read_jester_rows(a.path);
  std::vector<RatingsDataset> splits;
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < repeats; ++k) {
    seeds.push_back(derive_seed(a.seed, "jester_repeat", static_cast<std::uint64_t>(k)));
    splits.push_back(jester_split(rows, a.users, seeds.back()));
  }
  for (const auto& s : solvers) {
    opts.solver = s;
    std::vector<RealEvalResult> runs;
    std::size_t train = 0, test = 0;
    for (std::size_t k = 0; k < splits.size(); ++k) {
      runs.push_back(eval_real(splits[k], opts));
      write_real_row(out, splits[k], runs.back(), seeds[k], opts.clip, !a.no_timing);
      if (!runs.back().ok()) std::fprintf(stderr, "%s: %s\n", s.c_str(), runs.back().status.c_str());
      train += splits[k].train.size();
      test += splits[k].test.size();
    }
    write_real_mean_row(out, "jester", s, a.users, train / splits.size(), test / splits.size(),
                        summarize_real(runs), opts.clip);
  }
  return 0;
}

DenseMatrix read_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (harness::detail::trim_ws(line).empty()) continue;
    std::vector<double> row;
    for (auto f : harness::detail::split(line, ',')) {
      double v = 0;
      if (!harness::detail::parse_number(f, v))
        throw DataError(path + ":" + std::to_string(lineno) + ": unparsable number");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + " is empty");
  DenseMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

struct SpectrumArgs {
  std::string dataset;
  std::string path;
  std::string matrix;
  int top = 0;
  std::string out;
};

int run_spectrum_cmd(const SpectrumArgs& a) {
  DenseMatrix m;
  if (!a.matrix.empty()) {
    m = read_dense_csv(a.matrix);
  } else {
    if (a.dataset != "jester") throw ConfigError("--dataset must be jester (or pass --matrix)");
    if (a.path.empty()) throw ConfigError("--path is required");
    m = jester_complete_submatrix(read_jester_rows(a.path));
    std::fprintf(stderr, "complete submatrix: %ld users x %ld jokes\n",
                 static_cast<long>(m.rows()), static_cast<long>(m.cols()));
  }
  auto out = open_output(a.out);
  write_spectrum_csv(out, spectrum_dump(m, a.top));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix completion benchmarks"};
  app.require_subcommand(1);

  SweepArgs sweep;
  auto* sc = app.add_subcommand("sweep", "Run a synthetic (epsilon x SNR x trial x solver) sweep");
  sc->add_option("--config", sweep.config, "JSON sweep description")->required();
  sc->add_option("--out", sweep.out, "Output CSV")->required();
  sc->add_option("--seed", sweep.seed, "Override master_seed");
  sc->add_option("--jobs", sweep.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sc->add_option("--trials", sweep.trials, "Override trials");
  sc->add_flag("--no-timing", sweep.no_timing, "Leave the seconds column blank");
  sc->add_flag("--quiet", sweep.quiet, "No progress output");

  RealArgs real;
  auto* rc = app.add_subcommand("eval-real", "NMAE of a solver on Jester or MovieLens");
  rc->add_option("--dataset", real.dataset, "jester | movielens")->required();
  rc->add_option("--path", real.path, "Jester CSV file or directory; MovieLens directory with u1.base, u1.test")
      ->required();
  rc->add_option("--solver", real.solver,
                 "optspace | incremental_optspace | admira | fpca | midpoint | all")
      ->required();
  rc->add_option("--users", real.users, "Jester users to sample");
  rc->add_option("--seed", real.seed, "Split seed");
  rc->add_option("--repeats", real.repeats, "Jester splits to average (default 5)");
  rc->add_option("--rank", real.rank, "Rank for rank-aware solvers (default: estimated)");
  rc->add_flag("--no-clip", real.no_clip, "Score unclipped predictions");
  rc->add_flag("--no-timing", real.no_timing, "Leave the seconds column blank");
  rc->add_option("--out", real.out, "Output CSV")->required();

  SpectrumArgs spec;
  auto* pc = app.add_subcommand("spectrum", "Singular values of the complete Jester submatrix");
  pc->add_option("--dataset", spec.dataset, "jester");
  pc->add_option("--path", spec.path, "Jester CSV file or directory");
  pc->add_option("--matrix", spec.matrix, "Dense CSV matrix instead of a dataset");
  pc->add_option("--top", spec.top, "Keep the k largest values (0 = all)");
  pc->add_option("--out", spec.out, "Output CSV")->required();

  std::size_t pairs = 100000;
  std::uint64_t rseed = 1;
  auto* bc = app.add_subcommand("rand-baseline", "NMAE of uniform random predictions on [-10, 10]");
  bc->add_option("--pairs", pairs, "Monte-Carlo pairs")->required()->check(CLI::PositiveNumber);
  bc->add_option("--seed", rseed, "Seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  sweep.seed_set = sc->count("--seed") > 0;

  try {
    if (*sc) return run_sweep_cmd(sweep);
    if (*rc) return run_real_cmd(real);
    if (*pc) return run_spectrum_cmd(spec);
    if (*bc) {
      std::cout << format_double(random_prediction_nmae(rseed, pairs)) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitConfig;
}
