#include "autoriesz/benchmark.hpp"

#include <chrono>
#include <cmath>

#include "autoriesz/error.hpp"
#include "autoriesz/parallel.hpp"
#include "autoriesz/rng.hpp"

namespace autoriesz {

namespace {

struct Moments {
  double mean = 0.0;
  double mc_se = 0.0;
};

/// Mean and standard error of the mean; the standard error is 0 for one value.
Moments moments(const std::vector<double>& values) {
  const auto r = static_cast<double>(values.size());
  double sum = 0.0;
  for (const double v : values) sum += v;
  Moments m;
  m.mean = sum / r;
  if (values.size() < 2) return m;
  double ss = 0.0;
  for (const double v : values) ss += (v - m.mean) * (v - m.mean);
  m.mc_se = std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
  return m;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

BenchmarkRow run_benchmark(const BenchmarkCase& cell, unsigned threads) {
  if (cell.replicates < 1) throw UsageError("replicates must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  std::vector<ReplicateResult> results(static_cast<std::size_t>(cell.replicates));
  parallel_for(results.size(), threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(cell.seed, r);
    const Dataset data = simulate(cell.dgp, cell.n, seed);
    EstimatorSettings settings = cell.settings;
    settings.seed = seed;
    settings.threads = 1;
    const EstimateReport report = one_step_estimate(cell.spec, data, settings);
    results[r] = {report.theta_hat, report.plug_in, report.std_error, report.ci.lo, report.ci.hi};
  });

  BenchmarkRow row;
  row.label = cell.label;
  row.dgp = describe(cell.dgp);
  row.spec = cell.spec.name;
  row.method = std::string(to_string(cell.settings.riesz.method));
  row.n = cell.n;
  row.replicates = cell.replicates;
  row.truth = cell.truth;
  std::vector<double> estimates, plug_ins;
  double covered = 0.0, width = 0.0;
  for (const auto& r : results) {
    estimates.push_back(r.theta_hat);
    plug_ins.push_back(r.plug_in);
    covered += (r.ci_lo <= cell.truth && cell.truth <= r.ci_hi) ? 1.0 : 0.0;
    width += r.ci_hi - r.ci_lo;
  }
  const auto reps = static_cast<double>(results.size());
  const Moments est = moments(estimates);
  const Moments plug = moments(plug_ins);
  row.mean_estimate = est.mean;
  row.bias = est.mean - cell.truth;
  row.mc_se = est.mc_se;
  row.coverage = covered / reps;
  row.mean_ci_width = width / reps;
  row.plug_in_bias = plug.mean - cell.truth;
  row.plug_in_mc_se = plug.mc_se;
  row.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  row.replicate_results = std::move(results);
  return row;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "label,dgp,spec,method,n,replicates,truth,mean_estimate,bias,mc_se,coverage,mean_ci_width,plug_in_bias,"
         "plug_in_mc_se,runtime_seconds\n";
  for (const auto& r : rows) {
    out << csv_field(r.label) << ',' << csv_field(r.dgp) << ',' << csv_field(r.spec) << ',' << r.method << ',' << r.n << ',' << r.replicates << ','
        << format_double(r.truth) << ',' << format_double(r.mean_estimate) << ',' << format_double(r.bias) << ','
        << format_double(r.mc_se) << ',' << format_double(r.coverage) << ',' << format_double(r.mean_ci_width) << ','
        << format_double(r.plug_in_bias) << ',' << format_double(r.plug_in_mc_se) << ','
        << format_double(r.runtime_seconds) << '\n';
  }
}

}  // namespace autoriesz
