#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "mcomp/core/types.hpp"

namespace mcomp {

/// Output shared by every solver.
struct SolveResult {
  FactoredMatrix estimate;
  int iterations = 0;
  /// Observed-entry residual ||P_E(estimate) - P_E(N)||_F (FPCA: composite objective) per iteration.
  std::vector<double> objective_trace;
  double seconds = 0.0;
  int rank_used = 0;
  std::string stop_reason;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail
}  // namespace mcomp
