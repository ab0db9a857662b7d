#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/dataset.hpp"
#include "autoriesz/estimand.hpp"

namespace autoriesz {

/// Evaluable function of observations: n x p rows (schema order) -> n values.
using RowFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Binary W and A, normal mediator M, logistic binary outcome Y.
///   P(W=1) = 0.4, P(A=1) = 0.5, M ~ N(0.6 + 0.05A - 0.3W, 1),
///   P(Y=1 | A,M,W) = expit(-log 5 + log 2 A + log 3 M - log 1.2 W).
struct DgpAppendix {
  double p_w = 0.4;
  double p_a = 0.5;
  double m_intercept = 0.6;
  double m_a = 0.05;
  double m_w = -0.3;
  double m_sd = 1.0;
  double y_intercept = -std::log(5.0);
  double y_a = std::log(2.0);
  double y_m = std::log(3.0);
  double y_w = -std::log(1.2);

  void validate() const;
  double propensity(double /*w*/) const { return p_a; }
  double mediator_mean(double a, double w) const { return m_intercept + m_a * a + m_w * w; }
  double outcome_mean(double a, double m, double w) const;

  static Schema schema();
};

/// Binary W, A, Y with tabulated propensity and outcome means.
class DgpDiscrete {
 public:
  /// propensity[w] = P(A=1 | W=w); outcome_mean[a][w] = E[Y | A=a, W=w].
  /// Throws UsageError unless p_w and the propensities lie in (0, 1).
  DgpDiscrete(double p_w, std::array<double, 2> propensity, std::array<std::array<double, 2>, 2> outcome_mean);

  /// Confounded design used by the double-robustness benchmark:
  /// P(W=1)=0.4, P(A=1|W)=(0.3, 0.7), E[Y|A,W] = {{0.2, 0.5}, {0.4, 0.8}}; ATE = 0.24.
  static DgpDiscrete confounded();

  double p_w() const { return p_w_; }
  double propensity(double w) const { return propensity_[w != 0.0]; }
  double outcome_mean(double a, double w) const { return outcome_mean_[a != 0.0][w != 0.0]; }
  /// Marginal P(A=1).
  double treated_share() const;

  static Schema schema();

 private:
  double p_w_;
  std::array<double, 2> propensity_;
  std::array<std::array<double, 2>, 2> outcome_mean_;
};

using Dgp = std::variant<DgpAppendix, DgpDiscrete>;

std::string describe(const Dgp& dgp);
Schema dgp_schema(const Dgp& dgp);

Dataset simulate_appendix(Eigen::Index n, std::uint64_t seed, const DgpAppendix& dgp = {});
Dataset simulate_discrete(const DgpDiscrete& dgp, Eigen::Index n, std::uint64_t seed);
Dataset simulate(const Dgp& dgp, Eigen::Index n, std::uint64_t seed);

/// Ground truth by exact summation over the discrete cells and Gauss-Hermite
/// quadrature over the normal mediator.
struct TruthReport {
  std::string spec_name;
  std::string dgp;
  double theta = 0.0;           // contrast value for parametric specs
  std::vector<double> arms;     // theta(treated), theta(reference) for contrasts
  int nodes = 64;
  double doubled_theta = 0.0;   // same computation with twice the nodes
  double quadrature_gap = 0.0;  // |theta - doubled_theta|
};

inline constexpr int kDefaultQuadratureNodes = 64;
inline constexpr double kQuadratureAgreement = 1e-9;

/// Throws SchemaError when the spec references a variable the DGP lacks and
/// NumericalError when the node-doubling check exceeds 1e-9.
TruthReport truth_oracle(const EstimandSpec& spec, const Dgp& dgp, int nodes = kDefaultQuadratureNodes);

/// True stage regressions Q_1..Q_K of a non-parametric spec, as evaluable functions.
std::vector<RowFunction> true_regressions(const EstimandSpec& spec, const Dgp& dgp,
                                          int nodes = kDefaultQuadratureNodes);

/// Closed-form Riesz representer of a built-in estimand (the innermost one,
/// satisfying theta = E[alpha(X) Y]). For nde, `a_prime` selects the arm; without it
/// the contrast representer alpha(a'=1) - alpha(a'=0) is returned.
RowFunction closed_form_representer(std::string_view name, const Dgp& dgp, std::optional<double> a_prime = {});

/// Per-stage representers alpha_1..alpha_K of a built-in estimand.
std::vector<RowFunction> closed_form_stage_representers(std::string_view name, const Dgp& dgp,
                                                        std::optional<double> a_prime = {});

}  // namespace autoriesz
