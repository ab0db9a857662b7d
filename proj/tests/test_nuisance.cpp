#include <doctest.h>

#include <array>

#include "autoriesz/error.hpp"
#include "autoriesz/nuisance.hpp"
#include "autoriesz/simulator.hpp"

using namespace autoriesz;

namespace {

/// Cell means of Y over binary (a, w).
struct CellMeans {
  std::array<std::array<double, 2>, 2> sum{}, count{};
  explicit CellMeans(const Dataset& data) {
    const auto a = data.column("A"), w = data.column("W"), y = data.outcome();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      sum[int(a(i))][int(w(i))] += y(i);
      count[int(a(i))][int(w(i))] += 1.0;
    }
  }
  double mean(int a, int w) const { return sum[a][w] / count[a][w]; }
  double n_w(int w) const { return count[0][w] + count[1][w]; }
};

Basis linear(const Schema& schema, const std::vector<std::string>& columns) {
  std::vector<Feature> features{Feature{}};
  for (const auto& c : columns) features.push_back(Feature{{Factor{c, schema.index_of(c), Factor::Kind::power, 1.0}}});
  return Basis(features);
}

}  // namespace

TEST_CASE("logistic sieve recovers the outcome model") {
  const Eigen::Index n = 20000;
  const Dataset data = simulate_appendix(n, 51);
  const Basis basis = linear(data.schema, {"A", "M", "W"});
  const NuisanceFit fit = fit_logistic(data, data.outcome(), basis, 0.0);
  CHECK(fit.diagnostics.max_gradient < 1e-9);
  // Standard errors from the inverse Fisher information at the estimate.
  const Eigen::MatrixXd design = basis.evaluate(data.values);
  const Eigen::ArrayXd p = fit(data.values).array();
  const Eigen::MatrixXd info = design.transpose() * (p * (1.0 - p)).matrix().asDiagonal() * design;
  const Eigen::VectorXd se = info.inverse().diagonal().cwiseSqrt();
  const DgpAppendix truth;
  const Eigen::Vector4d beta{truth.y_intercept, truth.y_a, truth.y_m, truth.y_w};
  for (int j = 0; j < 4; ++j) CHECK(std::abs(fit.coef(j) - beta(j)) <= 4.0 * se(j));
  CHECK(((p > 0.0) && (p < 1.0)).all());
}

TEST_CASE("logistic sieve reports non-convergence") {
  Dataset data = simulate_discrete(DgpDiscrete::confounded(), 200, 52);
  data.values.col(data.schema.outcome_index()) = data.column("A");
  const Basis basis = Basis::saturated(data.schema, {"A"});
  CHECK_THROWS_AS(fit_logistic(data, data.outcome(), basis, 0.0, 5), NumericalError);
  // Separated cells push the fit to the boundary but predictions stay inside (0, 1).
  const NuisanceFit fit = fit_logistic(data, data.outcome(), basis, 0.0);
  const Eigen::ArrayXd p = fit(data.values).array();
  CHECK(((p > 0.0) && (p < 1.0)).all());
}

TEST_CASE("least squares residuals are orthogonal to the basis") {
  const Dataset data = simulate_appendix(3000, 53);
  const Basis basis = Basis::polynomial(data.schema, {"A", "M", "W"}, 3).rebind(data.schema);
  const NuisanceFit fit = fit_least_squares(data, data.outcome(), basis, 0.0);
  const Eigen::VectorXd residual = data.outcome() - fit(data.values);
  CHECK((basis.evaluate(data.values).transpose() * residual / double(data.rows())).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("fit_stage examples") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 4000, 54);
  const CellMeans cells(data);
  NuisanceSettings settings;
  settings.lambda = 0.0;

  SUBCASE("constant prev with a difference map gives a zero fit") {
    const EstimandSpec ate = builtin_spec("ate");
    NuisanceFit prev;
    prev.stage = 2;
    prev.basis = Basis::intercept_only();
    prev.coef = Eigen::VectorXd::Constant(1, 0.7);
    const NuisanceFit outer = fit_stage(ate, 1, data, &prev, settings);
    CHECK(outer(data.values).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("mean_treated saturated fit is the treated cell mean") {
    settings.bases = {BasisRecipe::saturated()};
    const NuisanceFit fit = fit_stage(builtin_spec("mean_treated"), 1, data, nullptr, settings);
    CHECK(fit.family == Family::logistic);
    const double treated = (cells.sum[1][0] + cells.sum[1][1]) / (cells.count[1][0] + cells.count[1][1]);
    Eigen::MatrixXd row = data.values.topRows(1);
    row(0, data.schema.index_of("A")) = 1.0;
    CHECK(fit(row)(0) == doctest::Approx(treated).epsilon(1e-10));
  }
  SUBCASE("outer stage needs its inner fit") {
    CHECK_THROWS_AS(fit_stage(builtin_spec("ate"), 1, data, nullptr, settings), UsageError);
  }
  SUBCASE("plug-in equals cell-mean enumeration") {
    for (const auto family : {OutcomeFamily::least_squares, OutcomeFamily::logistic}) {
      settings.family = family;
      const EstimandSpec ate = builtin_spec("ate");
      const auto fits = fit_nuisance_chain(ate, data, settings);
      const double plug_in = predict_mapped(fits[0], ate.stage(1).effective_map(), data).mean();
      double expected = 0.0;
      for (int w = 0; w < 2; ++w) expected += cells.n_w(w) / double(data.rows()) * (cells.mean(1, w) - cells.mean(0, w));
      CHECK(plug_in == doctest::Approx(expected).epsilon(1e-10));

      const EstimandSpec att = builtin_spec("att_control_mean");
      const auto att_fits = fit_nuisance_chain(att, data, settings);
      const double att_plug = predict_mapped(att_fits[0], att.stage(1).effective_map(), data).mean();
      // E_n[ E_n[Y | A=0, W] | A=1 ]
      const double treated = cells.count[1][0] + cells.count[1][1];
      const double att_expected = (cells.count[1][0] * cells.mean(0, 0) + cells.count[1][1] * cells.mean(0, 1)) / treated;
      CHECK(att_plug == doctest::Approx(att_expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("predict_mapped examples") {
  const Dataset data = simulate_appendix(50, 55);
  const Schema& schema = data.schema;
  NuisanceFit fit;
  fit.basis = linear(schema, {"A", "W"}).rebind(schema);
  SUBCASE("ATE map on fit(a, w) = a") {
    fit.coef = Eigen::Vector3d{0.0, 1.0, 0.0};
    CHECK(predict_mapped(fit, builtin_spec("ate").stage(2).effective_map(), data) == Eigen::VectorXd::Ones(50));
  }
  SUBCASE("ATT inner map on fit(a, w) = w") {
    fit.coef = Eigen::Vector3d{0.0, 0.0, 1.0};
    CHECK(predict_mapped(fit, builtin_spec("att_control_mean").stage(2).effective_map(), data) == data.column("W"));
  }
  SUBCASE("NDE innermost map evaluates at A = a'") {
    const NuisanceFit outcome = fit_logistic(data, data.outcome(), linear(schema, {"A", "M", "W"}), 1e-3);
    Dataset shifted = data;
    shifted.values.col(schema.index_of("A")).setOnes();
    CHECK(predict_mapped(outcome, builtin_spec("nde").instantiate(1.0).stage(3).effective_map(), data) ==
          outcome(shifted.values));
  }
}

TEST_CASE("outcome family names") {
  CHECK(outcome_family_from_string("auto") == OutcomeFamily::automatic);
  CHECK(outcome_family_from_string("ls") == OutcomeFamily::least_squares);
  CHECK_THROWS_AS(outcome_family_from_string("probit"), UsageError);
}
