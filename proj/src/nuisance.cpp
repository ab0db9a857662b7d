#include "autoriesz/nuisance.hpp"

#include <cmath>

#include "autoriesz/error.hpp"
#include "autoriesz/numeric.hpp"
#include "autoriesz/riesz.hpp"

namespace autoriesz {

std::string_view to_string(Family family) { return family == Family::logistic ? "logistic" : "least_squares"; }

OutcomeFamily outcome_family_from_string(std::string_view text) {
  if (text == "auto") return OutcomeFamily::automatic;
  if (text == "least_squares" || text == "ls") return OutcomeFamily::least_squares;
  if (text == "logistic") return OutcomeFamily::logistic;
  throw UsageError("unknown outcome family '" + std::string(text) + "' (expected auto, least_squares or logistic)");
}

Eigen::VectorXd NuisanceFit::evaluate(const Eigen::MatrixXd& rows) const {
  const Eigen::VectorXd eta = basis.evaluate(rows) * coef;
  if (family == Family::logistic) return expit(eta.array()).matrix();
  return eta;
}

NuisanceFit fit_least_squares(const Dataset& data, const Eigen::VectorXd& target, const Basis& basis,
                              std::optional<double> lambda) {
  const Eigen::Index n = data.rows();
  if (target.size() != n) throw UsageError("regression target must have one entry per row");
  const Basis bound = basis.rebind(data.schema);
  const Eigen::MatrixXd design = bound.evaluate(data.values);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd gram = design.transpose() * design * inv_n;
  const Eigen::VectorXd rhs = design.transpose() * target * inv_n;
  NuisanceFit fit;
  fit.family = Family::least_squares;
  fit.basis = bound;
  fit.lambda = lambda.value_or(default_ridge(gram));
  const GramSolve solved = solve_gram(gram, rhs, fit.lambda, "least-squares sieve");
  fit.coef = solved.solution.col(0);
  fit.diagnostics.condition = solved.condition;
  fit.diagnostics.ill_conditioned = solved.ill_conditioned;
  fit.diagnostics.max_gradient = (gram * fit.coef + fit.lambda * fit.coef - rhs).cwiseAbs().maxCoeff();
  return fit;
}

namespace {

double logistic_objective(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double lambda) {
  const Eigen::ArrayXd eta = (design * beta).array();
  // log(1 + e^eta) computed without overflow.
  const Eigen::ArrayXd softplus = eta.max(0.0) + (-eta.abs()).exp().log1p();
  return (softplus - y.array() * eta).mean() + 0.5 * lambda * beta.squaredNorm();
}

}  // namespace

NuisanceFit fit_logistic(const Dataset& data, const Eigen::VectorXd& target, const Basis& basis,
                         std::optional<double> lambda, int max_iterations, double tolerance) {
  const Eigen::Index n = data.rows();
  if (target.size() != n) throw UsageError("regression target must have one entry per row");
  if ((target.array() < 0.0).any() || (target.array() > 1.0).any()) {
    throw SchemaError("logistic regression needs targets in [0, 1]");
  }
  const Basis bound = basis.rebind(data.schema);
  const Eigen::MatrixXd design = bound.evaluate(data.values);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd gram = design.transpose() * design * inv_n;

  NuisanceFit fit;
  fit.family = Family::logistic;
  fit.basis = bound;
  fit.lambda = lambda.value_or(default_ridge(gram));
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(bound.dim());
  const double ybar = std::clamp(target.mean(), 1e-6, 1.0 - 1e-6);
  beta(0) = std::log(ybar / (1.0 - ybar));

  auto gradient_at = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd p = expit((design * b).array()).matrix();
    return Eigen::VectorXd(design.transpose() * (p - target) * inv_n + fit.lambda * b);
  };
  auto newton_direction = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& grad) {
    const Eigen::ArrayXd p = expit((design * b).array());
    const Eigen::VectorXd curvature = (p * (1.0 - p)).matrix();
    const Eigen::MatrixXd hessian = design.transpose() * curvature.asDiagonal() * design * inv_n;
    const GramSolve solved = solve_gram(hessian, grad, fit.lambda, "logistic sieve");
    fit.diagnostics.condition = solved.condition;
    fit.diagnostics.ill_conditioned = solved.ill_conditioned;
    return Eigen::VectorXd(solved.solution.col(0));
  };

  Eigen::VectorXd grad = gradient_at(beta);
  double objective = logistic_objective(design, target, beta, fit.lambda);
  int iter = 0;
  while (grad.cwiseAbs().maxCoeff() >= tolerance) {
    if (iter == max_iterations) {
      throw NumericalError("logistic sieve did not converge in " + std::to_string(max_iterations) +
                           " Newton iterations (max gradient " + format_double(grad.cwiseAbs().maxCoeff()) +
                           "); the outcome may be separated by the basis");
    }
    const Eigen::VectorXd step = newton_direction(beta, grad);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta - step;
    double candidate_objective = logistic_objective(design, target, candidate, fit.lambda);
    while (candidate_objective > objective + 1e-15 * std::abs(objective) && scale > 1e-10) {
      scale *= 0.5;
      candidate = beta - scale * step;
      candidate_objective = logistic_objective(design, target, candidate, fit.lambda);
    }
    beta = candidate;
    objective = candidate_objective;
    grad = gradient_at(beta);
    ++iter;
  }
  // One polishing step: Newton is quadratic here, so this takes the score to rounding level.
  const Eigen::VectorXd polished = beta - newton_direction(beta, grad);
  const Eigen::VectorXd polished_grad = gradient_at(polished);
  if (polished_grad.allFinite() && polished_grad.cwiseAbs().maxCoeff() <= grad.cwiseAbs().maxCoeff()) {
    beta = polished;
    grad = polished_grad;
  }
  fit.coef = beta;
  fit.diagnostics.iterations = iter;
  fit.diagnostics.max_gradient = grad.cwiseAbs().maxCoeff();
  return fit;
}

NuisanceFit fit_stage(const EstimandSpec& spec, int k, const Dataset& data, const NuisanceFit* prev,
                      const NuisanceSettings& settings) {
  if (k < 1 || k > spec.K()) throw UsageError("stage index out of range");
  const Basis basis = stage_basis(spec, k, data.schema, settings.bases, settings.degree);
  Eigen::VectorXd target;
  Family family = Family::least_squares;
  if (k == spec.K()) {
    target = data.outcome();
    const bool binary = data.schema.at(data.schema.outcome_index()).support.kind == Support::Kind::binary;
    if (settings.family == OutcomeFamily::logistic || (settings.family == OutcomeFamily::automatic && binary)) {
      family = Family::logistic;
    }
  } else {
    if (!prev) throw UsageError("stage k=" + std::to_string(k) + " needs the stage k+1 fit");
    target = predict_mapped(*prev, spec.stage(k + 1).effective_map(), data);
  }
  NuisanceFit fit = family == Family::logistic
                        ? fit_logistic(data, target, basis, settings.lambda, settings.max_iterations, settings.tolerance)
                        : fit_least_squares(data, target, basis, settings.lambda);
  fit.stage = k;
  return fit;
}

Eigen::VectorXd predict_mapped(const NuisanceFit& fit, const FunctionalMap& map, const Dataset& data) {
  return apply_map(map, [&](const Eigen::MatrixXd& rows) { return fit.evaluate(rows); }, data);
}

std::vector<NuisanceFit> fit_nuisance_chain(const EstimandSpec& spec, const Dataset& data, const NuisanceSettings& settings) {
  std::vector<NuisanceFit> fits(static_cast<std::size_t>(spec.K()));
  for (int k = spec.K(); k >= 1; --k) {
    const NuisanceFit* prev = k < spec.K() ? &fits[static_cast<std::size_t>(k)] : nullptr;
    fits[static_cast<std::size_t>(k - 1)] = fit_stage(spec, k, data, prev, settings);
  }
  return fits;
}

}  // namespace autoriesz
