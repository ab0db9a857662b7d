#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/dataset.hpp"
#include "autoriesz/estimand.hpp"
#include "autoriesz/nuisance.hpp"
#include "autoriesz/riesz.hpp"

namespace autoriesz {

/// D_k evaluated on every row.
struct EifTerm {
  int k = 0;
  Eigen::VectorXd values;
};

/// D_k = alpha_k (m_{k+1}(Q_{k+1}) - Q_k) for k > 1 and alpha_1 (m_2(Q_2) - theta),
/// with m_{K+1}(Q_{K+1}) = y. Functions are indexed by stage, alphas[k-1] = alpha_k.
std::vector<EifTerm> assemble_eif(const EstimandSpec& spec, const std::vector<RowFunction>& alphas,
                                  const std::vector<RowFunction>& regressions, const Dataset& data, double theta);
std::vector<EifTerm> assemble_eif(const EstimandSpec& spec, const std::vector<RieszFit>& alphas,
                                  const std::vector<NuisanceFit>& nuisances, const Dataset& data, double theta);

/// Representers and regressions for every stage, fitted on one sample.
struct PipelineFits {
  std::vector<RieszFit> alphas;
  std::vector<NuisanceFit> nuisances;
};

struct EstimatorSettings {
  RieszSettings riesz;
  NuisanceSettings nuisance;
  int folds = 5;
  std::uint64_t seed = 0;
  double level = 0.95;
  Eigen::Index min_fold_rows = 50;
  unsigned threads = 1;
};

PipelineFits fit_pipeline(const EstimandSpec& spec, const Dataset& data, const EstimatorSettings& settings);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

struct FoldDiagnostics {
  int fold = 0;
  Eigen::Index train_rows = 0;
  Eigen::Index eval_rows = 0;
  std::vector<double> riesz_loss;       // per arm and stage, arm-major
  std::vector<double> riesz_condition;  // sieve Gram conditions (NaN for MLP)
  std::vector<double> nuisance_condition;
};

/// One-step estimate for a single (instantiated) estimand.
struct ArmReport {
  std::string label;
  double theta_hat = 0.0;
  double plug_in = 0.0;
  double std_error = 0.0;
  ConfidenceInterval ci;
  Eigen::VectorXd eif_values;
};

struct Provenance {
  std::string spec_hash;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string settings_hash;
  std::string settings;  // canonical JSON text
};

/// For contrast estimands the top-level fields describe theta(treated) - theta(reference)
/// and `arms` holds both arms, estimated on the same folds.
struct EstimateReport {
  std::string spec_name;
  Eigen::Index n = 0;
  int folds = 1;
  double theta_hat = 0.0;
  double plug_in = 0.0;
  /// Per-row influence values at theta = plug_in, so mean(eif_values) = theta_hat - plug_in.
  Eigen::VectorXd eif_values;
  double std_error = 0.0;
  ConfidenceInterval ci;
  std::vector<FoldDiagnostics> per_fold;
  std::vector<ArmReport> arms;
  Provenance provenance;

  /// Influence values at theta = theta_hat; mean zero.
  Eigen::VectorXd centered_eif() const { return eif_values.array() - (theta_hat - plug_in); }
};

/// Cross-fit one-step estimator. folds = 1 fits and evaluates on the full sample.
EstimateReport one_step_estimate(const EstimandSpec& spec, const Dataset& data, const EstimatorSettings& settings);

struct OrthogonalityReport {
  std::vector<double> mean_terms;  // mean D_k, k = 1..K
  double max_inner = 0.0;          // max_{k>1} |mean D_k|
  bool shared_basis = false;       // alpha_k and Q_k on the same sieve, both with lambda = 0
  bool passed = true;              // max_inner <= 1e-10 whenever shared_basis
};

inline constexpr double kOrthogonalityTolerance = 1e-10;

OrthogonalityReport verify_orthogonality(const EstimandSpec& spec, const Dataset& data, const PipelineFits& fits);

/// Partition of rows into folds by a seeded permutation; fold[i] in [0, folds).
std::vector<int> assign_folds(Eigen::Index n, int folds, std::uint64_t seed);

}  // namespace autoriesz
