#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "autoriesz/benchmark.hpp"
#include "autoriesz/eif.hpp"
#include "autoriesz/error.hpp"
#include "autoriesz/hash.hpp"
#include "autoriesz/serialize.hpp"
#include "autoriesz/simulator.hpp"
#include "autoriesz/verify.hpp"

using namespace autoriesz;
namespace fs = std::filesystem;

namespace {

constexpr int kChecksFailed = 1;

/// Relative output paths resolve against AUTORIESZ_OUTPUT_DIR when it is set.
std::string output_path(const std::string& path) {
  const char* dir = std::getenv("AUTORIESZ_OUTPUT_DIR");
  if (!dir || !*dir || fs::path(path).is_absolute()) return path;
  fs::create_directories(dir);
  return (fs::path(dir) / path).string();
}

unsigned default_threads() {
  if (const char* env = std::getenv("AUTORIESZ_THREADS"); env && *env) {
    try {
      const int value = std::stoi(env);
      if (value >= 1) return static_cast<unsigned>(value);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("AUTORIESZ_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  const std::string target = output_path(path);
  std::ofstream out(target, std::ios::binary);
  if (!out) throw IoError("cannot write '" + target + "'");
  out << text;
  if (!out) throw IoError("write to '" + target + "' failed");
}

Dgp parse_dgp(const std::string& name) {
  if (name == "appendix") return DgpAppendix{};
  if (name == "discrete") return DgpDiscrete::confounded();
  throw UsageError("unknown DGP '" + name + "' (expected appendix or discrete)");
}

EstimandSpec resolve_spec(const std::string& text) {
  for (const auto& name : builtin_names()) {
    if (text == name) return builtin_spec(name);
  }
  if (!fs::exists(text)) throw UsageError("'" + text + "' is neither a built-in estimand nor a spec file");
  return load_spec(text);
}

std::vector<BasisRecipe> resolve_bases(const std::string& text, int K) {
  if (text.empty() || text == "auto") return {};
  std::vector<BasisRecipe> recipes;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) recipes.push_back(BasisRecipe::parse(item));
  if (recipes.size() == 1) recipes.assign(static_cast<std::size_t>(K), recipes.front());
  if (static_cast<int>(recipes.size()) != K) {
    throw UsageError("--basis lists " + std::to_string(recipes.size()) + " recipes for " + std::to_string(K) + " stages");
  }
  return recipes;
}

/// Learner flags shared by estimate, fit and benchmark.
struct LearnerOptions {
  std::string method = "sieve";
  std::string basis = "auto";
  int degree = 2;
  std::optional<double> lambda;
  std::optional<double> clip;
  std::string family = "auto";
  int epochs = 500;
  int width = 4;
  int layers = 2;
  double learning_rate = 1e-2;
  Eigen::Index batch_size = 0;
  int folds = 5;
  double level = 0.95;
  Eigen::Index min_fold_rows = 50;

  void attach(CLI::App* app) {
    app->add_option("--method", method, "Riesz learner")->check(CLI::IsMember({"sieve", "mlp"}));
    app->add_option("--basis", basis,
                    "auto, or intercept|saturated|poly[:d] for every stage, or a comma list with one per stage");
    app->add_option("--degree", degree, "polynomial degree of automatic bases")->check(CLI::PositiveNumber);
    app->add_option("--lambda", lambda, "ridge penalty (default 1e-6 * trace(G) / dim)")->check(CLI::NonNegativeNumber);
    app->add_option("--clip", clip, "bound on |alpha|")->check(CLI::PositiveNumber);
    app->add_option("--family", family, "innermost outcome family")->check(CLI::IsMember({"auto", "least_squares", "logistic"}));
    app->add_option("--epochs", epochs, "MLP epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--width", width, "MLP hidden width")->check(CLI::PositiveNumber);
    app->add_option("--layers", layers, "MLP hidden layers")->check(CLI::NonNegativeNumber);
    app->add_option("--lr", learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "MLP minibatch size (0 = full batch)")->check(CLI::NonNegativeNumber);
    app->add_option("--folds", folds, "cross-fitting folds (1 = none)")->check(CLI::PositiveNumber);
    app->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--min-fold-rows", min_fold_rows, "smallest allowed fold")->check(CLI::PositiveNumber);
  }

  EstimatorSettings settings(const EstimandSpec& spec, std::uint64_t seed) const {
    EstimatorSettings s;
    s.riesz.method = riesz_method_from_string(method);
    s.riesz.bases = s.nuisance.bases = resolve_bases(basis, spec.K());
    s.riesz.degree = s.nuisance.degree = degree;
    s.riesz.sieve.lambda = s.nuisance.lambda = lambda;
    s.riesz.sieve.clip = clip;
    s.riesz.mlp.epochs = epochs;
    s.riesz.mlp.width = width;
    s.riesz.mlp.hidden_layers = layers;
    s.riesz.mlp.learning_rate = learning_rate;
    s.riesz.mlp.batch_size = batch_size;
    s.riesz.mlp.seed = seed;
    s.nuisance.family = outcome_family_from_string(family);
    s.folds = folds;
    s.level = level;
    s.min_fold_rows = min_fold_rows;
    s.seed = seed;
    return s;
  }
};

void print_estimate(const EstimateReport& r) {
  std::printf("estimand   %s (n=%lld, folds=%d)\n", r.spec_name.c_str(), static_cast<long long>(r.n), r.folds);
  for (const auto& arm : r.arms) {
    if (r.arms.size() > 1) {
      std::printf("  %-12s theta %.6f  se %.6f\n", arm.label.c_str(), arm.theta_hat, arm.std_error);
    }
  }
  std::printf("theta_hat  %.6f\nplug_in    %.6f\nstd_error  %.6f\nci         [%.6f, %.6f] at %g\n", r.theta_hat,
              r.plug_in, r.std_error, r.ci.lo, r.ci.hi, r.ci.level);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic debiased estimation with Riesz regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "autoriesz 0.1.0");

  std::string dgp_name = "appendix", out, spec_text, data_path;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;

  auto* simulate_cmd = app.add_subcommand("simulate", "draw a dataset from a built-in DGP");
  simulate_cmd->add_option("--dgp", dgp_name, "appendix or discrete")->check(CLI::IsMember({"appendix", "discrete"}));
  simulate_cmd->add_option("--n", n, "rows")->required();
  simulate_cmd->add_option("--seed", seed, "random seed")->required();
  simulate_cmd->add_option("--out", out, "CSV path; the schema goes next to it")->required();

  LearnerOptions learner;
  auto* estimate_cmd = app.add_subcommand("estimate", "cross-fit one-step estimate with EIF standard errors");
  estimate_cmd->add_option("--spec", spec_text, "built-in name or spec file")->required();
  estimate_cmd->add_option("--data", data_path, "CSV with schema sidecar")->required();
  estimate_cmd->add_option("--seed", seed, "fold and MLP seed")->required();
  estimate_cmd->add_option("--threads", threads, "fold workers")->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--out", out, "report path (JSON)");
  learner.attach(estimate_cmd);

  auto* fit_cmd = app.add_subcommand("fit", "fit representers and regressions on the full dataset");
  fit_cmd->add_option("--spec", spec_text, "built-in name or spec file")->required();
  fit_cmd->add_option("--data", data_path, "CSV with schema sidecar")->required();
  fit_cmd->add_option("--seed", seed, "MLP seed")->required();
  fit_cmd->add_option("--out", out, "fits path (JSON)");
  learner.attach(fit_cmd);

  auto* truth_cmd = app.add_subcommand("truth", "population value of an estimand by quadrature");
  truth_cmd->add_option("--spec", spec_text, "built-in name or spec file")->required();
  truth_cmd->add_option("--dgp", dgp_name, "appendix or discrete")->check(CLI::IsMember({"appendix", "discrete"}));
  int nodes = kDefaultQuadratureNodes;
  truth_cmd->add_option("--nodes", nodes, "Gauss-Hermite nodes")->check(CLI::PositiveNumber);
  truth_cmd->add_option("--out", out, "report path (JSON)");

  std::vector<std::string> checks;
  bool flip_sign = false;
  auto* verify_cmd = app.add_subcommand("verify", "run the identity checks");
  verify_cmd->add_option("--check", checks, "subset of checks")->check(CLI::IsMember(verify_check_names()));
  verify_cmd->add_option("--seed", seed, "data seed")->required();
  verify_cmd->add_option("--n", n, "rows for data-based checks")->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--flip-representer-sign", flip_sign, "negate fitted representers (the check must then fail)");
  verify_cmd->add_option("--out", out, "report path (JSON)");

  std::vector<Eigen::Index> sizes;
  int replicates = 100;
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte Carlo bias, coverage and CI width");
  bench_cmd->add_option("--spec", spec_text, "built-in name or spec file")->required();
  bench_cmd->add_option("--dgp", dgp_name, "appendix or discrete")->check(CLI::IsMember({"appendix", "discrete"}));
  bench_cmd->add_option("--n", sizes, "sample sizes")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--replicates", replicates, "replicates per size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", seed, "base seed")->required();
  bench_cmd->add_option("--threads", threads, "replicate workers")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out, "CSV table path (stdout when absent)");
  learner.attach(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCategory::usage);
  }

  try {
    if (simulate_cmd->parsed()) {
      const Dgp dgp = parse_dgp(dgp_name);
      const Dataset data = simulate(dgp, n, seed);
      const std::string target = output_path(out);
      save_dataset(target, data);
      std::printf("wrote %lld rows to %s (%s)\n", static_cast<long long>(data.rows()), target.c_str(), describe(dgp).c_str());
      for (const auto& col : data.schema.columns()) {
        std::printf("  %-4s mean %.6f\n", col.name.c_str(), data.column(col.name).mean());
      }
    } else if (estimate_cmd->parsed()) {
      const EstimandSpec spec = resolve_spec(spec_text);
      const Dataset data = load_dataset(data_path);
      EstimatorSettings settings = learner.settings(spec, seed);
      settings.threads = threads.value_or(default_threads());
      const EstimateReport report = one_step_estimate(spec, data, settings);
      print_estimate(report);
      if (!out.empty()) write_text(out, estimate_report_to_json(report).dump(2) + "\n");
    } else if (fit_cmd->parsed()) {
      const EstimandSpec spec = resolve_spec(spec_text);
      const Dataset data = load_dataset(data_path);
      const EstimatorSettings settings = learner.settings(spec, seed);
      Json doc = Json::object();
      doc["spec"] = spec_to_json(spec);
      doc["dataset_hash"] = hex64(dataset_hash(data));
      doc["settings"] = settings_to_json(settings);
      const std::vector<double> arms = spec.contrast ? std::vector<double>{spec.contrast->treated, spec.contrast->reference}
                                                     : std::vector<double>{};
      Json fits = Json::array();
      for (const auto& arm : arms.empty() ? std::vector<EstimandSpec>{spec}
                                          : std::vector<EstimandSpec>{spec.instantiate(arms[0]), spec.instantiate(arms[1])}) {
        const PipelineFits fitted = fit_pipeline(arm, data, settings);
        Json entry = Json{{"riesz", Json::array()}, {"nuisance", Json::array()}};
        for (const auto& a : fitted.alphas) entry["riesz"].push_back(riesz_fit_to_json(a));
        for (const auto& q : fitted.nuisances) entry["nuisance"].push_back(nuisance_fit_to_json(q));
        for (std::size_t k = 0; k < fitted.alphas.size(); ++k) {
          std::printf("%s stage %zu: %s representer, fitted loss %.6f\n", arm.name.c_str(), k + 1,
                      fitted.alphas[k].kind().c_str(), fitted.alphas[k].fitted_loss());
        }
        fits.push_back(std::move(entry));
      }
      doc["fits"] = std::move(fits);
      if (!out.empty()) write_text(out, doc.dump(2) + "\n");
    } else if (truth_cmd->parsed()) {
      const TruthReport report = truth_oracle(resolve_spec(spec_text), parse_dgp(dgp_name), nodes);
      std::printf("theta %.17g (quadrature gap %.2e)\n", report.theta, report.quadrature_gap);
      if (!out.empty()) write_text(out, truth_report_to_json(report).dump(2) + "\n");
    } else if (verify_cmd->parsed()) {
      VerifyOptions options;
      options.seed = seed;
      if (n > 0) options.n = n;
      options.flip_representer_sign = flip_sign;
      const auto results = run_verify(checks, options);
      Json doc = Json::array();
      bool all = true;
      for (const auto& r : results) {
        std::printf("%s %-15s residual %.3e (tol %.0e) %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.residual,
                    r.tolerance, r.detail.c_str());
        doc.push_back(Json{{"check", r.name}, {"passed", r.passed}, {"residual", r.residual}, {"tolerance", r.tolerance}, {"detail", r.detail}});
        all = all && r.passed;
      }
      if (!out.empty()) write_text(out, doc.dump(2) + "\n");
      return all ? 0 : kChecksFailed;
    } else if (bench_cmd->parsed()) {
      const EstimandSpec spec = resolve_spec(spec_text);
      const Dgp dgp = parse_dgp(dgp_name);
      const double truth = truth_oracle(spec, dgp).theta;
      std::vector<BenchmarkRow> rows;
      for (const Eigen::Index size : sizes) {
        BenchmarkCase cell{spec.name, dgp, spec, learner.settings(spec, seed), size, replicates, seed, truth};
        rows.push_back(run_benchmark(cell, threads.value_or(default_threads())));
      }
      std::ostringstream table;
      write_benchmark_csv(table, rows);
      if (out.empty()) {
        std::cout << table.str();
      } else {
        write_text(out, table.str());
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.category()), e.what());
    return e.exit_code();
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "error (schema): %s\n", e.what());
    return static_cast<int>(ErrorCategory::schema);
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
    return static_cast<int>(ErrorCategory::io);
  }
  return 0;
}
