#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/eif.hpp"
#include "autoriesz/estimand.hpp"
#include "autoriesz/simulator.hpp"

namespace autoriesz {

/// One cell of a Monte Carlo grid.
struct BenchmarkCase {
  std::string label;  // free text, e.g. the arm of a robustness study
  Dgp dgp;
  EstimandSpec spec;
  EstimatorSettings settings;
  Eigen::Index n = 1000;
  int replicates = 100;
  std::uint64_t seed = 0;
  double truth = 0.0;
};

/// Per-replicate estimates, in replicate order.
struct ReplicateResult {
  double theta_hat = 0.0;
  double plug_in = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct BenchmarkRow {
  std::string label;
  std::string dgp;
  std::string spec;
  std::string method;
  Eigen::Index n = 0;
  int replicates = 0;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double mc_se = 0.0;  // sd of estimates / sqrt(replicates)
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  double plug_in_bias = 0.0;
  double plug_in_mc_se = 0.0;
  double runtime_seconds = 0.0;
  std::vector<ReplicateResult> replicate_results;
};

/// Replicate r simulates with derive_seed(seed, r) and cross-fits with
/// derive_seed(seed, r) as the estimator seed. Replicates run on `threads`
/// workers; the summary is reduced in replicate order, so it does not depend
/// on the thread count.
BenchmarkRow run_benchmark(const BenchmarkCase& cell, unsigned threads = 1);

/// Columns: label, dgp, spec, method, n, replicates, truth, mean_estimate, bias,
/// mc_se, coverage, mean_ci_width, plug_in_bias, plug_in_mc_se, runtime_seconds.
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace autoriesz
