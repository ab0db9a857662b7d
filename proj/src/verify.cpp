#include "autoriesz/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>

#include "autoriesz/eif.hpp"
#include "autoriesz/error.hpp"
#include "autoriesz/numeric.hpp"
#include "autoriesz/riesz.hpp"
#include "autoriesz/rng.hpp"
#include "autoriesz/simulator.hpp"

namespace autoriesz {

namespace {

CheckResult make_result(std::string name, double residual, double tolerance, std::string detail = {}) {
  return {std::move(name), residual, tolerance, std::isfinite(residual) && residual <= tolerance, std::move(detail)};
}

/// Every built-in estimand with contrasts split into their arms.
std::vector<EstimandSpec> builtin_arms() {
  std::vector<EstimandSpec> out;
  for (const auto& name : builtin_names()) {
    const EstimandSpec spec = builtin_spec(name);
    if (spec.contrast) {
      out.push_back(spec.instantiate(spec.contrast->treated));
      out.push_back(spec.instantiate(spec.contrast->reference));
    } else {
      out.push_back(spec);
    }
  }
  return out;
}

struct Cells {
  std::array<std::array<double, 2>, 2> count{}, sum{};  // [a][w]
  double n = 0.0;

  explicit Cells(const Dataset& data) {
    const auto a = data.column("A"), w = data.column("W"), y = data.outcome();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      count[a(i) != 0.0][w(i) != 0.0] += 1.0;
      sum[a(i) != 0.0][w(i) != 0.0] += y(i);
    }
    n = static_cast<double>(data.rows());
  }
  double p_a_given_w(int a, int w) const { return count[a][w] / (count[0][w] + count[1][w]); }
  double p_a(int a) const { return (count[a][0] + count[a][1]) / n; }
  double mean(int a, int w) const { return sum[a][w] / count[a][w]; }
};

}  // namespace

CheckResult check_representation_identity(const VerifyOptions& options) {
  const Dataset data = simulate_appendix(options.n, options.seed);
  RieszSettings settings;
  settings.sieve.lambda = 0.0;
  const double inv_n = 1.0 / static_cast<double>(data.rows());
  double worst = 0.0;
  std::string where;
  for (const auto& spec : builtin_arms()) {
    const auto fits = fit_riesz_chain(spec, data, settings);
    Eigen::VectorXd previous = Eigen::VectorXd::Ones(data.rows());
    for (int k = 1; k <= spec.K(); ++k) {
      const auto& sieve = std::get<SieveModel>(fits[static_cast<std::size_t>(k - 1)].model());
      Eigen::VectorXd alpha = fits[static_cast<std::size_t>(k - 1)](data.values);
      if (options.flip_representer_sign) alpha = -alpha;
      const Eigen::MatrixXd design = sieve.basis.evaluate(data.values);
      const FunctionalMap map = spec.stage(k).effective_map();
      for (Eigen::Index j = 0; j < sieve.basis.dim(); ++j) {
        const auto feature = [&](const Eigen::MatrixXd& rows) { return Eigen::VectorXd(sieve.basis.evaluate(rows).col(j)); };
        const double gap = std::abs(alpha.dot(design.col(j)) * inv_n - previous.dot(apply_map(map, feature, data)) * inv_n);
        if (gap > worst || where.empty()) {
          worst = std::max(worst, gap);
          where = spec.name + " stage " + std::to_string(k) + " feature " + sieve.basis.features()[static_cast<std::size_t>(j)].label();
        }
      }
      previous = alpha;
    }
  }
  return make_result("representation", worst, 1e-10, "worst at " + where);
}

CheckResult check_closed_form_recovery(const VerifyOptions& options) {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), options.n, options.seed);
  const Cells cells(data);
  const auto a = data.column("A"), w = data.column("W");
  RieszSettings settings;
  settings.sieve.lambda = 0.0;
  settings.bases = {BasisRecipe::intercept(), BasisRecipe::saturated()};
  const auto ate = fit_riesz_chain(builtin_spec("ate"), data, settings);
  settings.bases = {BasisRecipe::saturated(), BasisRecipe::saturated()};
  const auto att = fit_riesz_chain(builtin_spec("att_control_mean"), data, settings);
  const Eigen::VectorXd ate_alpha = ate[1](data.values);
  const Eigen::VectorXd att_alpha = att[1](data.values);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int ai = a(i) != 0.0, wi = w(i) != 0.0;
    const double eq6 = ai ? 1.0 / cells.p_a_given_w(1, wi) : -1.0 / cells.p_a_given_w(0, wi);
    const double eq7 = ai ? 0.0 : cells.p_a_given_w(1, wi) / (cells.p_a(1) * cells.p_a_given_w(0, wi));
    worst = std::max({worst, std::abs(ate_alpha(i) - eq6), std::abs(att_alpha(i) - eq7)});
  }
  return make_result("closed_form", worst, 1e-8, "ATE and ATT saturated representers");
}

CheckResult check_eif_formulas(const VerifyOptions& options) {
  const Eigen::Index n = 1000;
  Rng rng(derive_seed(options.seed, 3));
  const Schema schema = dgp_schema(DgpAppendix{});
  Dataset data{schema, Eigen::MatrixXd(n, 4), options.seed};
  const auto W = schema.index_of("W"), A = schema.index_of("A"), M = schema.index_of("M"), Y = schema.index_of("Y");
  for (Eigen::Index i = 0; i < n; ++i) {
    data.values(i, W) = rng.bernoulli(0.5);
    data.values(i, A) = rng.bernoulli(0.5);
    data.values(i, M) = rng.normal();
    data.values(i, Y) = rng.bernoulli(0.5);
  }
  auto coefs = [&](int k) {
    Eigen::VectorXd c(k);
    for (auto& v : c) v = rng.normal();
    return c;
  };
  const Eigen::VectorXd q3 = coefs(6), q2 = coefs(4), g = coefs(2), r = coefs(3);
  const double theta = rng.normal(), q1 = rng.normal(), p_bar = 0.2 + 0.6 * rng.uniform();

  using Rows = Eigen::MatrixXd;
  const auto col = [](const Rows& x, Eigen::Index j) { return x.col(j).array(); };
  const auto Q3 = [=](const Rows& x) -> Eigen::VectorXd {
    return (q3(0) + q3(1) * col(x, A) + q3(2) * col(x, M) + q3(3) * col(x, W) + q3(4) * col(x, A) * col(x, M) +
            q3(5) * col(x, M) * col(x, W)).matrix();
  };
  const auto Q2 = [=](const Rows& x) -> Eigen::VectorXd {
    return (q2(0) + q2(1) * col(x, A) + q2(2) * col(x, W) + q2(3) * col(x, A) * col(x, W)).matrix();
  };
  const auto Q1 = [=](const Rows& x) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(x.rows(), q1); };
  const auto pi = [=](const Rows& x) -> Eigen::ArrayXd { return expit((g(0) + g(1) * col(x, W)).eval()); };
  const auto ratio = [=](const Rows& x) -> Eigen::ArrayXd { return (r(0) + r(1) * col(x, M) + r(2) * col(x, W)).exp(); };
  const auto at = [](const Rows& x, Eigen::Index j, double v) {
    Rows out = x;
    out.col(j).setConstant(v);
    return out;
  };
  const auto one = [](const Rows& x) -> Eigen::VectorXd { return Eigen::VectorXd::Ones(x.rows()); };
  const Rows& X = data.values;
  const Eigen::ArrayXd a = X.col(A).array(), y = X.col(Y).array();
  const auto total = [](const std::vector<EifTerm>& terms) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(terms.front().values.size());
    for (const auto& t : terms) sum += t.values;
    return sum;
  };

  double worst = 0.0;
  {
    const RowFunction alpha2 = [=](const Rows& x) -> Eigen::VectorXd {
      return (col(x, A) / pi(x) - (1.0 - col(x, A)) / (1.0 - pi(x))).matrix();
    };
    const Eigen::ArrayXd eq10 = alpha2(X).array() * (y - Q2(X).array()) + Q2(at(X, A, 1)).array() - Q2(at(X, A, 0)).array() - theta;
    const Eigen::VectorXd generic = total(assemble_eif(builtin_spec("ate"), {one, alpha2}, {Q1, Q2}, data, theta));
    worst = std::max(worst, (generic.array() - eq10).abs().maxCoeff());
  }
  {
    const RowFunction alpha1 = [=](const Rows& x) -> Eigen::VectorXd { return (col(x, A) / p_bar).matrix(); };
    const RowFunction alpha2 = [=](const Rows& x) -> Eigen::VectorXd {
      return ((1.0 - col(x, A)) * pi(x) / ((1.0 - pi(x)) * p_bar)).matrix();
    };
    const Eigen::ArrayXd eq11 = alpha2(X).array() * (y - Q2(X).array()) + a / p_bar * (Q2(at(X, A, 0)).array() - theta);
    const Eigen::VectorXd generic = total(assemble_eif(builtin_spec("att_control_mean"), {alpha1, alpha2}, {Q1, Q2}, data, theta));
    worst = std::max(worst, (generic.array() - eq11).abs().maxCoeff());
  }
  for (const double a_prime : {1.0, 0.0}) {
    const RowFunction alpha2 = [=](const Rows& x) -> Eigen::VectorXd { return ((1.0 - col(x, A)) / (1.0 - pi(x))).matrix(); };
    const RowFunction alpha3 = [=](const Rows& x) -> Eigen::VectorXd {
      const Eigen::ArrayXd f_a = a_prime == 1.0 ? pi(x) : Eigen::ArrayXd(1.0 - pi(x));
      return ((col(x, A) == a_prime).cast<double>() / f_a * ratio(x)).matrix();
    };
    const Eigen::ArrayXd eq12 = alpha3(X).array() * (y - Q3(X).array()) +
                                alpha2(X).array() * (Q3(at(X, A, a_prime)).array() - Q2(X).array()) +
                                Q2(at(X, A, 0)).array() - theta;
    const EstimandSpec nde = builtin_spec("nde").instantiate(a_prime);
    const Eigen::VectorXd generic = total(assemble_eif(nde, {one, alpha2, alpha3}, {Q1, Q2, Q3}, data, theta));
    worst = std::max(worst, (generic.array() - eq12).abs().maxCoeff());
  }
  return make_result("eif_formulas", worst, 1e-12, "ATE, ATT and both NDE arms on 1000 random rows");
}

CheckResult check_orthogonality(const VerifyOptions& options) {
  const Dataset data = simulate_appendix(options.n, options.seed);
  EstimatorSettings settings;
  settings.riesz.sieve.lambda = 0.0;
  settings.nuisance.lambda = 0.0;
  double worst = 0.0;
  std::string detail;
  for (const auto& spec : builtin_arms()) {
    const OrthogonalityReport report = verify_orthogonality(spec, data, fit_pipeline(spec, data, settings));
    if (!report.shared_basis) detail += spec.name + " does not share bases; ";
    worst = std::max(worst, report.max_inner);
  }
  CheckResult result = make_result("orthogonality", worst, kOrthogonalityTolerance, detail.empty() ? "all built-ins" : detail);
  result.passed = result.passed && detail.empty();
  return result;
}

CheckResult check_saturated_exactness(const VerifyOptions& options) {
  const Dataset data = simulate_discrete(DgpDiscrete::confounded(), options.n, options.seed);
  const Cells cells(data);
  EstimatorSettings settings;
  settings.folds = 1;
  settings.riesz.sieve.lambda = 0.0;
  settings.nuisance.lambda = 0.0;
  settings.seed = options.seed;
  const double ate = one_step_estimate(builtin_spec("ate"), data, settings).theta_hat;
  const double att = one_step_estimate(builtin_spec("att_control_mean"), data, settings).theta_hat;
  double ate_enum = 0.0, att_enum = 0.0;
  for (int w = 0; w < 2; ++w) {
    const double n_w = cells.count[0][w] + cells.count[1][w];
    ate_enum += n_w / cells.n * (cells.mean(1, w) - cells.mean(0, w));
    att_enum += cells.count[1][w] / (cells.count[1][0] + cells.count[1][1]) * cells.mean(0, w);
  }
  const double worst = std::max(std::abs(ate - ate_enum), std::abs(att - att_enum));
  return make_result("exactness", worst, 1e-10,
                     "ATE " + format_double(ate) + " vs " + format_double(ate_enum) + ", ATT " + format_double(att) +
                         " vs " + format_double(att_enum));
}

CheckResult check_mlp_gradients(const VerifyOptions& options) {
  const Dataset data = simulate_appendix(16, options.seed);
  const Eigen::VectorXd weights = (data.column("W").array() + 0.5).matrix();
  double worst = 0.0;
  for (const std::uint64_t stream : {0, 1, 2}) {
    MlpConfig config;
    config.seed = derive_seed(options.seed, stream);
    const auto ate = builtin_spec("ate");
    worst = std::max(worst, mlp_gradient_check(make_mlp(data.schema, {"A", "W"}, config), ate.stage(2).effective_map(), data));
    const auto nde = builtin_spec("nde").instantiate(1.0);
    worst = std::max(worst, mlp_gradient_check(make_mlp(data.schema, {"A", "M", "W"}, config),
                                               nde.stage(3).effective_map(), data, &weights));
  }
  return make_result("gradients", worst, 1e-4, "2x4 ReLU networks, 16 rows, step 1e-5");
}

std::vector<std::string> verify_check_names() {
  return {"representation", "closed_form", "eif_formulas", "orthogonality", "exactness", "gradients"};
}

std::vector<CheckResult> run_verify(const std::vector<std::string>& checks, const VerifyOptions& options) {
  static const std::map<std::string, std::function<CheckResult(const VerifyOptions&)>> registry = {
      {"representation", check_representation_identity}, {"closed_form", check_closed_form_recovery},
      {"eif_formulas", check_eif_formulas},               {"orthogonality", check_orthogonality},
      {"exactness", check_saturated_exactness},           {"gradients", check_mlp_gradients}};
  const std::vector<std::string> names = checks.empty() ? verify_check_names() : checks;
  std::vector<CheckResult> results;
  for (const auto& name : names) {
    const auto it = registry.find(name);
    if (it == registry.end()) throw UsageError("unknown check '" + name + "'");
    results.push_back(it->second(options));
  }
  return results;
}

}  // namespace autoriesz
