#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <string_view>

#include <Eigen/Dense>

namespace autoriesz {

/// Logistic function in branch form; never overflows.
template <std::floating_point Scalar>
Scalar expit(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto expit(const Eigen::ArrayBase<Derived>& x) {
  return x.unaryExpr([](typename Derived::Scalar v) { return expit(v); });
}

template <typename Scalar>
Scalar normal_pdf(Scalar x, Scalar mean, Scalar sd) {
  const Scalar z = (x - mean) / sd;
  return std::exp(Scalar(-0.5) * z * z) / (sd * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
}

/// Standard normal quantile.
double normal_quantile(double p);

/// Default ridge penalty 1e-6 * trace(G) / dim(G).
double default_ridge(const Eigen::MatrixXd& gram);

/// Result of solving (G + lambda I) x = rhs.
struct GramSolve {
  Eigen::MatrixXd solution;
  double condition = 1.0;   // of G + lambda I
  bool ill_conditioned = false;  // condition above 1e10
};

inline constexpr double kConditionWarning = 1e10;

/// Symmetric positive-definite solve. A numerically singular system throws
/// NumericalError mentioning `context` rather than pseudo-inverting.
GramSolve solve_gram(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double lambda, std::string_view context);

}  // namespace autoriesz
