#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autoriesz {

/// Outcome of one identity check: the worst residual against its tolerance.
struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  Eigen::Index n = 2000;
  /// Test hook: negate every fitted representer before the representation identity check.
  bool flip_representer_sign = false;
};

/// mean[alpha_k f] = mean[alpha_{k-1} m_k(f)] for every basis feature f, lambda = 0 sieves,
/// every stage of every built-in estimand.
CheckResult check_representation_identity(const VerifyOptions& options);
/// Saturated ATE and ATT representers equal their empirical-propensity closed forms.
CheckResult check_closed_form_recovery(const VerifyOptions& options);
/// Generic EIF assembly against the hand-written ATE, ATT and NDE influence functions
/// on random nuisance functions.
CheckResult check_eif_formulas(const VerifyOptions& options);
/// |mean D_k| for k > 1 with shared lambda = 0 bases, no cross-fitting.
CheckResult check_orthogonality(const VerifyOptions& options);
/// Saturated one-step ATE and ATT estimates equal cell-mean enumeration.
CheckResult check_saturated_exactness(const VerifyOptions& options);
/// Backpropagated MLP gradients against central differences on 16 rows.
CheckResult check_mlp_gradients(const VerifyOptions& options);

/// representation, closed_form, eif_formulas, orthogonality, exactness, gradients.
std::vector<std::string> verify_check_names();
/// Runs the named checks (all when `checks` is empty). Unknown names throw UsageError.
std::vector<CheckResult> run_verify(const std::vector<std::string>& checks, const VerifyOptions& options);

}  // namespace autoriesz
