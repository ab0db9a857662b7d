#include "autoriesz/numeric.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <string>

#include "autoriesz/error.hpp"

namespace autoriesz {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal quantile requires 0 < p < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double default_ridge(const Eigen::MatrixXd& gram) {
  if (gram.rows() == 0) return 0.0;
  return 1e-6 * gram.trace() / static_cast<double>(gram.rows());
}

GramSolve solve_gram(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double lambda, std::string_view context) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("ridge penalty must be finite and >= 0");
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += lambda;
  if (!system.allFinite()) throw NumericalError(std::string(context) + ": Gram matrix has non-finite entries");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(system, Eigen::EigenvaluesOnly);
  const double largest = spectrum.eigenvalues().maxCoeff();
  const double smallest = spectrum.eigenvalues().minCoeff();
  if (!(smallest > largest * 1e-13) || !(largest > 0.0)) {
    throw NumericalError(std::string(context) + ": Gram matrix is singular" +
                         (lambda == 0.0 ? "; use a ridge penalty lambda > 0 or reduce the basis"
                                        : "; reduce the basis"));
  }
  GramSolve out;
  out.condition = largest / smallest;
  out.ill_conditioned = out.condition > kConditionWarning;
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(context) + ": Cholesky factorisation failed; the Gram matrix is not positive definite");
  }
  out.solution = llt.solve(rhs);
  return out;
}

}  // namespace autoriesz
