#include <doctest.h>

#include <array>
#include <cmath>

#include "autoriesz/error.hpp"
#include "autoriesz/riesz.hpp"
#include "autoriesz/simulator.hpp"

using namespace autoriesz;

namespace {

/// Empirical cell counts over binary (a, w).
struct CellCounts {
  std::array<std::array<double, 2>, 2> count{};  // [a][w]
  double n = 0.0;

  explicit CellCounts(const Dataset& data) {
    const auto a = data.column("A");
    const auto w = data.column("W");
    for (Eigen::Index i = 0; i < data.rows(); ++i) count[int(a(i))][int(w(i))] += 1.0;
    n = double(data.rows());
  }
  double p_a_given_w(int a, int w) const { return count[a][w] / (count[0][w] + count[1][w]); }
  double p_a(int a) const { return (count[a][0] + count[a][1]) / n; }
};

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

FunctionalMap ate_map() { return builtin_spec("ate").stage(2).effective_map(); }

Eigen::VectorXd map_of_feature(const Basis& basis, Eigen::Index j, const FunctionalMap& map, const Dataset& data) {
  auto feature = [&](const Eigen::MatrixXd& rows) { return Eigen::VectorXd(basis.evaluate(rows).col(j)); };
  return apply_map(map, feature, data);
}

}  // namespace

TEST_CASE("riesz_loss examples") {
  const Dataset discrete = simulate_discrete(DgpDiscrete::confounded(), 2000, 3);
  SUBCASE("constant function under the ATE map") {
    for (const double c : {0.0, 1.5, -2.0}) {
      const auto f = [c](const Eigen::MatrixXd& rows) { return Eigen::VectorXd::Constant(rows.rows(), c); };
      CHECK(riesz_loss(f, ate_map(), discrete) == doctest::Approx(c * c).epsilon(1e-14));
    }
  }
  SUBCASE("mean_treated map with f = 1(A=1)") {
    const Eigen::Index n = 1'000'000;
    const Dataset data = simulate_discrete(DgpDiscrete(0.4, {0.5, 0.5}, {{{0.3, 0.3}, {0.6, 0.6}}}), n, 11);
    const auto a = data.schema.index_of("A");
    const auto f = [a](const Eigen::MatrixXd& rows) { return Eigen::VectorXd((rows.col(a).array() == 1.0).cast<double>()); };
    const double loss = riesz_loss(f, builtin_spec("mean_treated").stage(1).effective_map(), data);
    CHECK(std::abs(loss + 1.5) <= 4.0 * std::sqrt(0.25 / double(n)));
  }
  SUBCASE("true representer attains -E[alpha^2]") {
    const Eigen::Index n = 400'000;
    const DgpDiscrete dgp = DgpDiscrete::confounded();
    const Dataset data = simulate_discrete(dgp, n, 12);
    const RowFunction alpha = closed_form_representer("ate", dgp);
    const Eigen::VectorXd a = alpha(data.values);
    // E[alpha^2] = sum_w P(w) [1/pi(w) + 1/(1 - pi(w))]
    double expected = 0.0;
    for (int w = 0; w < 2; ++w) {
      const double pw = w ? dgp.p_w() : 1.0 - dgp.p_w();
      expected += pw * (1.0 / dgp.propensity(w) + 1.0 / (1.0 - dgp.propensity(w)));
    }
    const double loss = riesz_loss(alpha, ate_map(), data);
    const Eigen::ArrayXd per_row = a.array().square() - 2.0 * a.array().square();
    const double mc_se = std::sqrt((per_row - per_row.mean()).square().mean() / double(n));
    CHECK(std::abs(loss + expected) <= 4.0 * mc_se);
  }
}

TEST_CASE("fit_sieve recovers empirical closed forms on saturated designs") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 3000, 21);
  const CellCounts cells(data);
  const auto a = data.column("A");
  const auto w = data.column("W");
  const SieveOptions exact{0.0, {}};

  SUBCASE("ATE") {
    const Basis basis = Basis::saturated(data.schema, {"A", "W"});
    const RieszFit fit = fit_sieve(ate_map(), data, basis, exact);
    const Eigen::VectorXd alpha = fit(data.values);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int ai = int(a(i)), wi = int(w(i));
      const double expected = ai == 1 ? 1.0 / cells.p_a_given_w(1, wi) : -1.0 / cells.p_a_given_w(0, wi);
      worst = std::max(worst, std::abs(alpha(i) - expected));
    }
    CHECK(worst <= 1e-8);
    CHECK(fit.kind() == "sieve");
  }
  SUBCASE("intercept-only basis under the ATE map is zero") {
    const RieszFit fit = fit_sieve(ate_map(), data, Basis::intercept_only(), exact);
    CHECK(max_abs(fit(data.values)) == 0.0);
  }
  SUBCASE("mean_treated") {
    const Basis basis = Basis::saturated(data.schema, {"A"});
    const RieszFit fit = fit_sieve(builtin_spec("mean_treated").stage(1).effective_map(), data, basis, exact);
    const Eigen::VectorXd alpha = fit(data.values);
    for (Eigen::Index i = 0; i < 50; ++i) {
      CHECK(alpha(i) == doctest::Approx(a(i) == 1.0 ? 1.0 / cells.p_a(1) : 0.0).epsilon(1e-10));
    }
  }
  SUBCASE("ATT chain") {
    RieszSettings settings;
    settings.bases = {BasisRecipe::saturated(), BasisRecipe::saturated()};
    settings.sieve.lambda = 0.0;
    const auto fits = fit_riesz_chain(builtin_spec("att_control_mean"), data, settings);
    const Eigen::VectorXd alpha1 = fits[0](data.values);
    const Eigen::VectorXd alpha2 = fits[1](data.values);
    double worst1 = 0.0, worst2 = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int ai = int(a(i)), wi = int(w(i));
      const double e1 = ai == 1 ? 1.0 / cells.p_a(1) : 0.0;
      const double e2 = ai == 0 ? cells.p_a_given_w(1, wi) / (cells.p_a_given_w(0, wi) * cells.p_a(1)) : 0.0;
      worst1 = std::max(worst1, std::abs(alpha1(i) - e1));
      worst2 = std::max(worst2, std::abs(alpha2(i) - e2));
    }
    CHECK(worst1 <= 1e-8);
    CHECK(worst2 <= 1e-8);
  }
  SUBCASE("sequential NDE stage 2") {
    const Dataset appendix = simulate_appendix(3000, 22);
    const CellCounts ac(appendix);
    RieszSettings settings;
    settings.bases = {BasisRecipe::intercept(), BasisRecipe::saturated(), BasisRecipe::polynomial(2)};
    settings.sieve.lambda = 0.0;
    const auto [alpha2, alpha3] = fit_sequential_nde(appendix, 1.0, settings);
    const Eigen::VectorXd v = alpha2(appendix.values);
    const auto aa = appendix.column("A");
    const auto ww = appendix.column("W");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < appendix.rows(); ++i) {
      const double expected = aa(i) == 0.0 ? 1.0 / ac.p_a_given_w(0, int(ww(i))) : 0.0;
      worst = std::max(worst, std::abs(v(i) - expected));
    }
    CHECK(worst <= 1e-8);
    CHECK(alpha3(appendix.values).allFinite());
  }
}

TEST_CASE("sieve fit properties") {
  const Dataset data = simulate_appendix(2000, 31);
  const EstimandSpec nde = builtin_spec("nde").instantiate(1.0);
  const FunctionalMap map3 = nde.stage(3).effective_map();
  const Basis basis = Basis::polynomial(data.schema, {"A", "M", "W"}, 2).rebind(data.schema);
  const Eigen::VectorXd weights = data.column("W").array() + 0.5;
  const Eigen::MatrixXd design = basis.evaluate(data.values);

  SUBCASE("representation identity at lambda = 0") {
    const RieszFit fit = fit_sieve(map3, data, basis, {0.0, {}}, &weights);
    const Eigen::VectorXd alpha = fit(data.values);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < basis.dim(); ++j) {
      const double lhs = alpha.dot(design.col(j)) / double(data.rows());
      const double rhs = weights.dot(map_of_feature(basis, j, map3, data)) / double(data.rows());
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    CHECK(worst <= 1e-10);
    CHECK(fit.fitted_loss() == doctest::Approx(riesz_loss(fit, map3, data, &weights)).epsilon(1e-10));
    CHECK(fit.diagnostics().boundedness == doctest::Approx(std::sqrt(alpha.squaredNorm() / double(data.rows()))).epsilon(1e-9));
  }
  SUBCASE("first-order condition with ridge") {
    const double lambda = 0.05;
    const RieszFit fit = fit_sieve(map3, data, basis, {lambda, {}}, &weights);
    const Eigen::VectorXd alpha = fit(data.values);
    const auto& coef = std::get<SieveModel>(fit.model()).coef;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < basis.dim(); ++j) {
      const double lhs = alpha.dot(design.col(j)) / double(data.rows()) + lambda * coef(j);
      const double rhs = weights.dot(map_of_feature(basis, j, map3, data)) / double(data.rows());
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    CHECK(worst <= 1e-10);
  }
  SUBCASE("random perturbations never lower the ridged loss") {
    const double lambda = 1e-4;
    const RieszFit fit = fit_sieve(map3, data, basis, {lambda, {}}, &weights);
    const Eigen::VectorXd coef = std::get<SieveModel>(fit.model()).coef;
    auto ridged = [&](const Eigen::VectorXd& c) {
      const auto f = [&](const Eigen::MatrixXd& rows) { return Eigen::VectorXd(basis.evaluate(rows) * c); };
      return riesz_loss(f, map3, data, &weights) + lambda * c.squaredNorm();
    };
    const double base = ridged(coef);
    Rng rng(99);
    double worst_drop = -1.0;
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd dir(coef.size());
      for (auto& d : dir) d = rng.normal();
      dir.normalize();
      worst_drop = std::max(worst_drop, base - ridged(coef + 1e-3 * dir));
    }
    CHECK(worst_drop <= 1e-12);
  }
  SUBCASE("fitted loss is nondecreasing in lambda") {
    double previous = -std::numeric_limits<double>::infinity();
    for (const double lambda : {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
      const double loss = fit_sieve(map3, data, basis, {lambda, {}}, &weights).fitted_loss();
      CHECK(loss >= previous);
      previous = loss;
    }
  }
  SUBCASE("zero weights give a zero representer") {
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(data.rows());
    const RieszFit fit = fit_sieve(map3, data, basis, {1e-3, {}}, &zeros);
    CHECK(max_abs(fit(data.values)) == 0.0);
  }
  SUBCASE("clipping bounds the representer and counts clipped rows") {
    const RieszFit fit = fit_sieve(map3, data, basis, {0.0, 1.0}, &weights);
    CHECK(max_abs(fit(data.values)) <= 1.0);
    CHECK(fit.diagnostics().clipped > 0);
  }
}

TEST_CASE("fit_sieve refuses singular designs") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 500, 41);
  const Basis base = Basis::saturated(data.schema, {"A"});
  std::vector<Feature> features = base.features();
  features.push_back(features.back());
  const Basis duplicated(features);
  CHECK_THROWS_AS(fit_sieve(ate_map(), data, duplicated, {0.0, {}}), NumericalError);
  CHECK_NOTHROW(fit_sieve(ate_map(), data, duplicated, {1e-3, {}}));
}

TEST_CASE("auto basis recipes") {
  const Schema schema = dgp_schema(DgpAppendix{});
  CHECK(auto_recipe(schema, {}, 2) == BasisRecipe::intercept());
  CHECK(auto_recipe(schema, {"A", "W"}, 2) == BasisRecipe::saturated());
  CHECK(auto_recipe(schema, {"A", "M", "W"}, 3) == BasisRecipe::polynomial(3));
  CHECK_THROWS_AS(stage_basis(builtin_spec("ate"), 1, schema, {BasisRecipe::saturated()}, 2), UsageError);
  CHECK(riesz_method_from_string("mlp") == RieszMethod::mlp);
  CHECK_THROWS_AS(riesz_method_from_string("forest"), UsageError);
}

TEST_CASE("alpha_3 approaches the density-ratio representer as n grows") {
  const DgpAppendix dgp;
  const Dataset test = simulate_appendix(20000, 777);
  const RowFunction truth = closed_form_stage_representers("nde", dgp, 1.0)[2];
  const Eigen::VectorXd target = truth(test.values);
  RieszSettings settings;
  settings.bases = {BasisRecipe::intercept(), BasisRecipe::saturated(), BasisRecipe::polynomial(3)};
  std::vector<double> mse;
  for (const Eigen::Index n : {1000, 8000}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto [a2, a3] = fit_sequential_nde(simulate_appendix(n, derive_seed(5, s)), 1.0, settings);
      total += (a3(test.values) - target).squaredNorm() / double(test.rows());
    }
    mse.push_back(total / 5.0);
  }
  CHECK(mse[1] < mse[0]);
}
