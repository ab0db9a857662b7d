#include <doctest.h>

#include <array>
#include <cmath>

#include "autoriesz/eif.hpp"
#include "autoriesz/error.hpp"
#include "autoriesz/serialize.hpp"
#include "autoriesz/simulator.hpp"

using namespace autoriesz;

namespace {

double sample_sd(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().sum() / double(v.size() - 1));
}

RowFunction constant(double c) {
  return [c](const Eigen::MatrixXd& rows) { return Eigen::VectorXd::Constant(rows.rows(), c); };
}

EstimatorSettings exact_settings(int folds = 1) {
  EstimatorSettings s;
  s.folds = folds;
  s.riesz.sieve.lambda = 0.0;
  s.nuisance.lambda = 0.0;
  return s;
}

}  // namespace

TEST_CASE("assemble_eif term structure") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 100, 61);
  SUBCASE("single stage uses the outcome") {
    const auto terms = assemble_eif(builtin_spec("mean_treated"), {constant(2.0)}, {constant(0.3)}, data, 0.5);
    REQUIRE(terms.size() == 1);
    CHECK(terms[0].k == 1);
    CHECK((terms[0].values - 2.0 * (data.outcome().array() - 0.5).matrix()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("stage-count mismatch") {
    CHECK_THROWS_AS(assemble_eif(builtin_spec("ate"), {constant(1.0)}, {constant(0.0)}, data, 0.0), UsageError);
  }
  SUBCASE("non-finite values name the row") {
    const auto bad = [](const Eigen::MatrixXd& rows) {
      Eigen::VectorXd v = Eigen::VectorXd::Ones(rows.rows());
      v(7) = std::numeric_limits<double>::infinity();
      return v;
    };
    try {
      assemble_eif(builtin_spec("ate"), {constant(1.0), bad}, {constant(0.0), constant(0.0)}, data, 0.0);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("row 7") != std::string::npos);
      CHECK(std::string(e.what()).find("D_2") != std::string::npos);
    }
  }
}

TEST_CASE("assign_folds") {
  const auto folds = assign_folds(103, 5, 9);
  std::array<int, 5> sizes{};
  for (const int f : folds) ++sizes[std::size_t(f)];
  for (const int s : sizes) CHECK((s == 20 || s == 21));
  CHECK(folds == assign_folds(103, 5, 9));
  CHECK(folds != assign_folds(103, 5, 10));
  CHECK_THROWS_AS(assign_folds(10, 0, 1), UsageError);
}

TEST_CASE("one-step report identities") {
  const Dataset data = simulate_appendix(1500, 62);
  EstimatorSettings settings;
  settings.seed = 3;
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const EstimateReport report = one_step_estimate(builtin_spec(name), data, settings);
    const double n = double(data.rows());
    CHECK(std::abs(report.eif_values.mean() - (report.theta_hat - report.plug_in)) <= 1e-12);
    CHECK(std::abs(report.centered_eif().mean()) <= 1e-12);
    CHECK(report.std_error == doctest::Approx(sample_sd(report.eif_values) / std::sqrt(n)).epsilon(1e-12));
    const double z = 1.959963984540054;
    CHECK(report.ci.lo == doctest::Approx(report.theta_hat - z * report.std_error).epsilon(1e-12));
    CHECK(report.ci.hi == doctest::Approx(report.theta_hat + z * report.std_error).epsilon(1e-12));
    CHECK(report.per_fold.size() == 5);
    CHECK(report.eif_values.size() == data.rows());
    for (const auto& arm : report.arms) {
      CHECK(std::abs(arm.eif_values.mean() - (arm.theta_hat - arm.plug_in)) <= 1e-12);
    }
  }
}

TEST_CASE("contrast reports difference the arms") {
  const Dataset data = simulate_appendix(1000, 63);
  const EstimateReport report = one_step_estimate(builtin_spec("nde"), data, EstimatorSettings{});
  REQUIRE(report.arms.size() == 2);
  CHECK(report.theta_hat == report.arms[0].theta_hat - report.arms[1].theta_hat);
  CHECK(report.plug_in == report.arms[0].plug_in - report.arms[1].plug_in);
  CHECK(report.eif_values == report.arms[0].eif_values - report.arms[1].eif_values);
  CHECK(report.arms[0].label == "a_prime=1");
}

TEST_CASE("saturated one-step equals enumeration of the empirical distribution") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 2500, 64);
  std::array<std::array<double, 2>, 2> count{}, sum{};
  const auto a = data.column("A"), w = data.column("W"), y = data.outcome();
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    count[int(a(i))][int(w(i))] += 1;
    sum[int(a(i))][int(w(i))] += y(i);
  }
  double ate = 0.0, att = 0.0;
  const double treated = count[1][0] + count[1][1];
  for (int v = 0; v < 2; ++v) {
    ate += (count[0][v] + count[1][v]) / double(data.rows()) * (sum[1][v] / count[1][v] - sum[0][v] / count[0][v]);
    att += count[1][v] / treated * sum[0][v] / count[0][v];
  }
  CHECK(std::abs(one_step_estimate(builtin_spec("ate"), data, exact_settings()).theta_hat - ate) <= 1e-10);
  CHECK(std::abs(one_step_estimate(builtin_spec("att_control_mean"), data, exact_settings()).theta_hat - att) <= 1e-10);
}

TEST_CASE("estimates scale with the outcome") {
  Dataset data = simulate_appendix(1200, 65);
  EstimatorSettings settings;
  settings.nuisance.family = OutcomeFamily::least_squares;
  settings.seed = 8;
  const double c = 3.5;
  Dataset scaled = data;
  scaled.values.col(data.schema.outcome_index()) *= c;
  for (const auto* name : {"ate", "att_control_mean", "mean_treated"}) {
    CAPTURE(name);
    const auto base = one_step_estimate(builtin_spec(name), data, settings);
    const auto big = one_step_estimate(builtin_spec(name), scaled, settings);
    CHECK(big.theta_hat == doctest::Approx(c * base.theta_hat).epsilon(1e-9));
    CHECK(big.std_error == doctest::Approx(c * base.std_error).epsilon(1e-9));
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Dataset data = simulate_appendix(800, 66);
  EstimatorSettings settings;
  settings.seed = 12;
  settings.riesz.method = RieszMethod::mlp;
  settings.riesz.mlp.epochs = 30;
  const auto serial = one_step_estimate(builtin_spec("nde"), data, settings);
  settings.threads = 3;
  const auto parallel = one_step_estimate(builtin_spec("nde"), data, settings);
  CHECK(serial.eif_values == parallel.eif_values);
  CHECK(serial.theta_hat == parallel.theta_hat);
  CHECK(serial.provenance.settings_hash == parallel.provenance.settings_hash);
}

TEST_CASE("fold validation") {
  SUBCASE("too few rows per fold") {
    CHECK_THROWS_AS(one_step_estimate(builtin_spec("ate"), simulate_appendix(200, 67), EstimatorSettings{}), UsageError);
  }
  SUBCASE("a training sample without one treatment level") {
    Dataset data = simulate_appendix(400, 68);
    data.values.col(data.schema.index_of("A")).setOnes();
    data.values(0, data.schema.index_of("A")) = 0.0;
    CHECK_THROWS_AS(one_step_estimate(builtin_spec("ate"), data, EstimatorSettings{}), SchemaError);
  }
  SUBCASE("missing columns are named") {
    const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 400, 69);
    CHECK_THROWS_WITH_AS(one_step_estimate(builtin_spec("nde"), data, EstimatorSettings{}), doctest::Contains("'M'"),
                         SchemaError);
  }
}

TEST_CASE("verify_orthogonality") {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), 1000, 70);
  const EstimandSpec ate = builtin_spec("ate");
  SUBCASE("saturated bases") {
    const auto report = verify_orthogonality(ate, data, fit_pipeline(ate, data, exact_settings()));
    CHECK(report.shared_basis);
    CHECK(report.passed);
    CHECK(report.max_inner <= 1e-10);
    CHECK(report.mean_terms.size() == 2);
  }
  SUBCASE("intercept-only bases on both sides") {
    EstimatorSettings settings = exact_settings();
    settings.riesz.bases = settings.nuisance.bases = {BasisRecipe::intercept(), BasisRecipe::intercept()};
    const auto report = verify_orthogonality(ate, data, fit_pipeline(ate, data, settings));
    CHECK(report.shared_basis);
    CHECK(report.max_inner <= 1e-10);
  }
  SUBCASE("mismatched bases are only reported") {
    EstimatorSettings settings = exact_settings();
    settings.nuisance.bases = {BasisRecipe::intercept(), BasisRecipe::intercept()};
    const auto report = verify_orthogonality(ate, data, fit_pipeline(ate, data, settings));
    CHECK_FALSE(report.shared_basis);
    CHECK(report.passed);
    CHECK(report.max_inner > 1e-6);
  }
}

TEST_CASE("report serialization") {
  const Dataset data = simulate_appendix(500, 71);
  EstimatorSettings settings;
  settings.folds = 2;
  const EstimateReport report = one_step_estimate(builtin_spec("nde"), data, settings);
  const Json doc = estimate_report_to_json(report);
  CHECK(doc["theta_hat"].get<double>() == report.theta_hat);
  CHECK(doc["eif_values"].size() == 500);
  CHECK(doc["arms"].size() == 2);
  CHECK(doc["provenance"]["settings"]["folds"] == 2);
  CHECK(doc["provenance"]["dataset_hash"].get<std::string>().size() == 16);
  // The document survives a text round trip with exact doubles.
  CHECK(Json::parse(doc.dump())["std_error"].get<double>() == report.std_error);

  const PipelineFits fits = fit_pipeline(builtin_spec("ate"), data, settings);
  const Json fit_doc = riesz_fit_to_json(fits.alphas[1]);
  CHECK(fit_doc["kind"] == "sieve");
  CHECK(fit_doc["coefficients"].size() == fit_doc["basis"].size());
  const Basis restored = basis_from_json(fit_doc["basis"], data.schema);
  CHECK(restored == std::get<SieveModel>(fits.alphas[1].model()).basis);
  CHECK(nuisance_fit_to_json(fits.nuisances[1])["family"] == "logistic");
}
