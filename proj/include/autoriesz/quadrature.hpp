#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace autoriesz {

/// Gauss-Hermite rule for the standard normal weight: E[g(Z)] ~= sum_i w_i g(x_i).
template <typename Scalar = double>
struct GaussHermite {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  /// E[g(mean + sd * Z)].
  template <typename F>
  Scalar expect(Scalar mean, Scalar sd, F&& g) const {
    Scalar total(0);
    for (Eigen::Index i = 0; i < nodes.size(); ++i) total += weights(i) * g(mean + sd * nodes(i));
    return total;
  }
};

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the
/// probabilists' Hermite recurrence, weights the squared first eigenvector components.
template <typename Scalar = double>
GaussHermite<Scalar> gauss_hermite(int n) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<Scalar>(i));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
  GaussHermite<Scalar> rule;
  rule.nodes = solver.eigenvalues();
  rule.weights = solver.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return rule;
}

}  // namespace autoriesz
