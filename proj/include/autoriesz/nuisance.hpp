#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/basis.hpp"
#include "autoriesz/dataset.hpp"
#include "autoriesz/estimand.hpp"

namespace autoriesz {

enum class Family { least_squares, logistic };
std::string_view to_string(Family family);

/// Family for the innermost stage; outer stages always use least squares.
enum class OutcomeFamily { automatic, least_squares, logistic };
OutcomeFamily outcome_family_from_string(std::string_view text);

struct NuisanceDiagnostics {
  double condition = 0.0;
  bool ill_conditioned = false;
  int iterations = 0;          // Newton iterations (logistic)
  double max_gradient = 0.0;   // at the returned coefficients
};

/// Fitted regression Q_k over a sieve.
struct NuisanceFit {
  int stage = 0;
  Family family = Family::least_squares;
  Basis basis;
  Eigen::VectorXd coef;
  double lambda = 0.0;
  NuisanceDiagnostics diagnostics;

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd operator()(const Eigen::MatrixXd& rows) const { return evaluate(rows); }
};

struct NuisanceSettings {
  std::vector<BasisRecipe> bases;  // per stage k = 1..K; empty = auto
  int degree = 2;
  std::optional<double> lambda;    // default 1e-6 * trace(G) / dim(G)
  OutcomeFamily family = OutcomeFamily::automatic;
  int max_iterations = 100;
  double tolerance = 1e-9;         // max |gradient component|
};

/// Least-squares sieve fit of `target` on `basis`.
NuisanceFit fit_least_squares(const Dataset& data, const Eigen::VectorXd& target, const Basis& basis,
                              std::optional<double> lambda);
/// Ridge-penalised logistic sieve fit by damped Newton iterations.
NuisanceFit fit_logistic(const Dataset& data, const Eigen::VectorXd& target, const Basis& basis,
                         std::optional<double> lambda, int max_iterations = 100, double tolerance = 1e-9);

/// Fits Q_k. For k = K the target is the outcome; otherwise the pseudo-outcome
/// m_{k+1}(x; prev) with `prev` the stage k+1 fit.
NuisanceFit fit_stage(const EstimandSpec& spec, int k, const Dataset& data, const NuisanceFit* prev,
                      const NuisanceSettings& settings);

/// Row-wise m(x; fit).
Eigen::VectorXd predict_mapped(const NuisanceFit& fit, const FunctionalMap& map, const Dataset& data);

/// Q_1..Q_K, fitted innermost first.
std::vector<NuisanceFit> fit_nuisance_chain(const EstimandSpec& spec, const Dataset& data, const NuisanceSettings& settings);

}  // namespace autoriesz
