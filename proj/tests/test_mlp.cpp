#include <doctest.h>

#include "autoriesz/error.hpp"
#include "autoriesz/riesz.hpp"
#include "autoriesz/simulator.hpp"

using namespace autoriesz;

TEST_CASE("analytic MLP gradient matches central differences") {
  const Dataset data = simulate_appendix(16, 8);
  const FunctionalMap map = builtin_spec("nde").instantiate(1.0).stage(3).effective_map();
  const Eigen::VectorXd weights = data.column("W").array() * 2.0 - 0.5;
  MlpConfig config;
  for (const std::uint64_t seed : {1, 2, 3}) {
    config.seed = seed;
    const MlpModel model = make_mlp(data.schema, {"A", "M", "W"}, config);
    CHECK(model.network.parameter_count() == 3 * 4 + 4 + 4 * 4 + 4 + 4 + 1);
    CHECK(mlp_gradient_check(model, map, data, &weights) < 1e-4);
  }
}

TEST_CASE("MLP training contracts") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 400, 9);
  const FunctionalMap map = builtin_spec("ate").stage(2).effective_map();
  MlpConfig config;
  config.seed = 4;

  SUBCASE("zero epochs return the initialisation") {
    config.epochs = 0;
    const RieszFit fit = fit_mlp(map, data, {"A", "W"}, config);
    const MlpModel initial = make_mlp(data.schema, {"A", "W"}, config);
    CHECK(std::get<MlpModel>(fit.model()).network.flatten() == initial.network.flatten());
    CHECK(fit.diagnostics().training_curve.size() == 1);
    CHECK(fit.fitted_loss() == doctest::Approx(riesz_loss(fit, map, data)).epsilon(1e-12));
  }
  SUBCASE("training never ends above the initial loss") {
    config.epochs = 50;
    const RieszFit fit = fit_mlp(map, data, {"A", "W"}, config);
    CHECK(fit.diagnostics().training_curve.size() == 51);
    CHECK(fit.fitted_loss() <= fit.diagnostics().training_curve.front());
    CHECK(fit.fitted_loss() == doctest::Approx(riesz_loss(fit, map, data)).epsilon(1e-12));
    CHECK(fit.kind() == "mlp");
  }
  SUBCASE("deterministic given the seed") {
    config.epochs = 20;
    config.batch_size = 64;
    const RieszFit a = fit_mlp(map, data, {"A", "W"}, config);
    const RieszFit b = fit_mlp(map, data, {"A", "W"}, config);
    CHECK(a(data.values) == b(data.values));
  }
  SUBCASE("divergence is reported") {
    config.epochs = 200;
    config.learning_rate = 1e200;
    CHECK_THROWS_AS(fit_mlp(map, data, {"A", "W"}, config), NumericalError);
  }
  SUBCASE("invalid configurations") {
    config.width = 0;
    CHECK_THROWS_AS(fit_mlp(map, data, {"A", "W"}, config), UsageError);
  }
}

TEST_CASE("MLP reaches the saturated sieve minimum on the ATE map") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 5000, 10);
  const FunctionalMap map = builtin_spec("ate").stage(2).effective_map();
  const double sieve_min =
      fit_sieve(map, data, Basis::saturated(data.schema, {"A", "W"}), {0.0, {}}).fitted_loss();
  MlpConfig config;
  config.seed = 17;
  const RieszFit fit = fit_mlp(map, data, {"A", "W"}, config);
  CHECK(fit.fitted_loss() >= sieve_min - 1e-9);
  CHECK(std::abs(fit.fitted_loss() - sieve_min) <= 0.05 * std::abs(sieve_min));
}
