#include "autoriesz/eif.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "autoriesz/error.hpp"
#include "autoriesz/hash.hpp"
#include "autoriesz/numeric.hpp"
#include "autoriesz/parallel.hpp"
#include "autoriesz/rng.hpp"
#include "autoriesz/serialize.hpp"

namespace autoriesz {

namespace {

void check_finite(const Eigen::VectorXd& values, int k, std::string_view what) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values(i))) {
      throw NumericalError("non-finite " + std::string(what) + " in EIF term D_" + std::to_string(k) + " at row " +
                           std::to_string(i) + " (" + format_double(values(i)) + ")");
    }
  }
}

/// Per-row ingredients of the EIF for one stage: alpha_k, m_{k+1}(Q_{k+1}) (y at k = K) and Q_k.
struct StageValues {
  Eigen::VectorXd alpha;
  Eigen::VectorXd target;
  Eigen::VectorXd regression;
};

std::vector<StageValues> stage_values(const EstimandSpec& spec, const std::vector<RowFunction>& alphas,
                                      const std::vector<RowFunction>& regressions, const Dataset& data) {
  const auto K = static_cast<std::size_t>(spec.K());
  if (alphas.size() != K || regressions.size() != K) {
    throw UsageError("expected " + std::to_string(K) + " representers and regressions, got " +
                     std::to_string(alphas.size()) + " and " + std::to_string(regressions.size()));
  }
  std::vector<StageValues> out(K);
  for (int k = 1; k <= spec.K(); ++k) {
    auto& s = out[static_cast<std::size_t>(k - 1)];
    s.alpha = alphas[static_cast<std::size_t>(k - 1)](data.values);
    s.regression = regressions[static_cast<std::size_t>(k - 1)](data.values);
    s.target = k == spec.K() ? data.outcome()
                             : apply_map(spec.stage(k + 1).effective_map(), regressions[static_cast<std::size_t>(k)], data);
    check_finite(s.alpha, k, "Riesz representer");
    check_finite(s.regression, k, "regression");
    check_finite(s.target, k, "pseudo-outcome");
  }
  return out;
}

std::vector<RowFunction> as_functions(const std::vector<RieszFit>& fits) {
  std::vector<RowFunction> out;
  for (const auto& f : fits) out.push_back(f.as_function());
  return out;
}

std::vector<RowFunction> as_functions(const std::vector<NuisanceFit>& fits) {
  std::vector<RowFunction> out;
  for (const auto& f : fits) out.push_back([f](const Eigen::MatrixXd& rows) { return f.evaluate(rows); });
  return out;
}

double sample_sd(const Eigen::VectorXd& x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

ConfidenceInterval interval(double theta, double se, double level) {
  const double z = normal_quantile(0.5 + 0.5 * level);
  return {theta - z * se, theta + z * se, level};
}

/// Row-aligned ingredients of one arm, assembled across folds.
struct ArmRows {
  Eigen::VectorXd alpha1;
  Eigen::VectorXd target1;
  Eigen::VectorXd inner;  // sum_{k>1} D_k
  Eigen::VectorXd plug_in;

  explicit ArmRows(Eigen::Index n)
      : alpha1(Eigen::VectorXd::Zero(n)), target1(Eigen::VectorXd::Zero(n)), inner(Eigen::VectorXd::Zero(n)),
        plug_in(Eigen::VectorXd::Zero(n)) {}
};

ArmReport summarize(const ArmRows& rows, std::string label, double level) {
  const auto n = static_cast<double>(rows.alpha1.size());
  const double scale = rows.alpha1.mean();
  if (!(std::abs(scale) > 1e-12)) {
    throw NumericalError("outermost Riesz representer has mean " + format_double(scale) + "; cannot solve for theta");
  }
  ArmReport arm;
  arm.label = std::move(label);
  arm.plug_in = rows.plug_in.mean();
  arm.theta_hat = (rows.inner.sum() + rows.alpha1.dot(rows.target1)) / (scale * n);
  arm.eif_values = (rows.inner.array() + rows.alpha1.array() * (rows.target1.array() - arm.plug_in)) / scale;
  arm.std_error = sample_sd(arm.eif_values) / std::sqrt(n);
  arm.ci = interval(arm.theta_hat, arm.std_error, level);
  return arm;
}

void check_treatment_levels(const Dataset& data, std::span<const Eigen::Index> rows, int fold) {
  const int t = data.schema.treatment_index();
  if (t < 0) return;
  const auto& support = data.schema.at(t).support;
  if (!support.is_discrete()) return;
  std::set<double> seen;
  for (const auto i : rows) seen.insert(data.values(i, t));
  for (const double level : support.values()) {
    if (!seen.contains(level)) {
      throw SchemaError("training sample for fold " + std::to_string(fold) + " has no rows with " +
                        data.schema.at(t).name + " = " + format_double(level) +
                        "; use fewer folds or more data");
    }
  }
}

}  // namespace

std::vector<EifTerm> assemble_eif(const EstimandSpec& spec, const std::vector<RowFunction>& alphas,
                                  const std::vector<RowFunction>& regressions, const Dataset& data, double theta) {
  const auto values = stage_values(spec, alphas, regressions, data);
  std::vector<EifTerm> terms;
  for (int k = 1; k <= spec.K(); ++k) {
    const auto& s = values[static_cast<std::size_t>(k - 1)];
    EifTerm term{k, k == 1 ? Eigen::VectorXd(s.alpha.array() * (s.target.array() - theta))
                           : Eigen::VectorXd(s.alpha.array() * (s.target - s.regression).array())};
    check_finite(term.values, k, "value");
    terms.push_back(std::move(term));
  }
  return terms;
}

std::vector<EifTerm> assemble_eif(const EstimandSpec& spec, const std::vector<RieszFit>& alphas,
                                  const std::vector<NuisanceFit>& nuisances, const Dataset& data, double theta) {
  return assemble_eif(spec, as_functions(alphas), as_functions(nuisances), data, theta);
}

PipelineFits fit_pipeline(const EstimandSpec& spec, const Dataset& data, const EstimatorSettings& settings) {
  return {fit_riesz_chain(spec, data, settings.riesz), fit_nuisance_chain(spec, data, settings.nuisance)};
}

std::vector<int> assign_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 1) throw UsageError("number of folds must be >= 1");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < order.size(); ++p) fold[static_cast<std::size_t>(order[p])] = static_cast<int>(p % static_cast<std::size_t>(folds));
  return fold;
}

EstimateReport one_step_estimate(const EstimandSpec& spec, const Dataset& data, const EstimatorSettings& settings) {
  spec.check_schema(data.schema);
  const Eigen::Index n = data.rows();
  const int V = settings.folds;
  if (V < 1) throw UsageError("number of folds must be >= 1");
  if (!(settings.level > 0.0 && settings.level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  if (n < static_cast<Eigen::Index>(V) * settings.min_fold_rows) {
    throw UsageError(std::to_string(n) + " rows cannot fill " + std::to_string(V) + " folds of at least " +
                     std::to_string(settings.min_fold_rows) + " rows");
  }

  std::vector<EstimandSpec> arms;
  std::vector<std::string> labels;
  if (spec.contrast) {
    for (const double v : {spec.contrast->treated, spec.contrast->reference}) {
      arms.push_back(spec.instantiate(v));
      labels.push_back(spec.contrast->parameter + "=" + format_double(v));
    }
  } else {
    arms.push_back(spec);
    labels.push_back(spec.name);
  }

  const auto fold_of = assign_folds(n, V, settings.seed);
  std::vector<std::vector<Eigen::Index>> eval_rows(static_cast<std::size_t>(V)), train_rows(static_cast<std::size_t>(V));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int f = fold_of[static_cast<std::size_t>(i)];
    for (int v = 0; v < V; ++v) {
      if (v == f) eval_rows[static_cast<std::size_t>(v)].push_back(i);
      else train_rows[static_cast<std::size_t>(v)].push_back(i);
    }
  }
  if (V == 1) train_rows[0] = eval_rows[0];
  for (int v = 0; v < V; ++v) check_treatment_levels(data, train_rows[static_cast<std::size_t>(v)], v);

  std::vector<ArmRows> rows(arms.size(), ArmRows(n));
  std::vector<FoldDiagnostics> diagnostics(static_cast<std::size_t>(V));

  parallel_for(static_cast<std::size_t>(V), settings.threads, [&](std::size_t v) {
    const Dataset train = data.subset(train_rows[v]);
    const Dataset eval = data.subset(eval_rows[v]);
    EstimatorSettings local = settings;
    local.riesz.mlp.seed = derive_seed(settings.seed, v + 1);
    FoldDiagnostics& diag = diagnostics[v];
    diag.fold = static_cast<int>(v);
    diag.train_rows = train.rows();
    diag.eval_rows = eval.rows();
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const PipelineFits fits = fit_pipeline(arms[a], train, local);
      for (const auto& r : fits.alphas) {
        diag.riesz_loss.push_back(r.fitted_loss());
        diag.riesz_condition.push_back(r.diagnostics().condition);
      }
      for (const auto& q : fits.nuisances) diag.nuisance_condition.push_back(q.diagnostics.condition);
      const auto values = stage_values(arms[a], as_functions(fits.alphas), as_functions(fits.nuisances), eval);
      const Eigen::VectorXd plug = predict_mapped(fits.nuisances[0], arms[a].stage(1).effective_map(), eval);
      check_finite(plug, 1, "plug-in value");
      ArmRows& out = rows[a];
      for (Eigen::Index j = 0; j < eval.rows(); ++j) {
        const Eigen::Index i = eval_rows[v][static_cast<std::size_t>(j)];
        out.alpha1(i) = values[0].alpha(j);
        out.target1(i) = values[0].target(j);
        out.plug_in(i) = plug(j);
        double inner = 0.0;
        for (std::size_t k = 1; k < values.size(); ++k) {
          inner += values[k].alpha(j) * (values[k].target(j) - values[k].regression(j));
        }
        out.inner(i) = inner;
      }
    }
  });

  EstimateReport report;
  report.spec_name = spec.name;
  report.n = n;
  report.folds = V;
  report.per_fold = std::move(diagnostics);
  for (std::size_t a = 0; a < arms.size(); ++a) report.arms.push_back(summarize(rows[a], labels[a], settings.level));

  if (spec.contrast) {
    const ArmReport& t = report.arms[0];
    const ArmReport& r = report.arms[1];
    report.theta_hat = t.theta_hat - r.theta_hat;
    report.plug_in = t.plug_in - r.plug_in;
    report.eif_values = t.eif_values - r.eif_values;
  } else {
    report.theta_hat = report.arms[0].theta_hat;
    report.plug_in = report.arms[0].plug_in;
    report.eif_values = report.arms[0].eif_values;
  }
  report.std_error = sample_sd(report.eif_values) / std::sqrt(static_cast<double>(n));
  report.ci = interval(report.theta_hat, report.std_error, settings.level);
  report.provenance.spec_hash = hex64(fnv1a(print_spec(spec)));
  report.provenance.dataset_hash = hex64(dataset_hash(data));
  report.provenance.seed = settings.seed;
  report.provenance.settings = settings_to_json(settings).dump();
  report.provenance.settings_hash = hex64(fnv1a(report.provenance.settings));
  return report;
}

OrthogonalityReport verify_orthogonality(const EstimandSpec& spec, const Dataset& data, const PipelineFits& fits) {
  const double theta = predict_mapped(fits.nuisances.at(0), spec.stage(1).effective_map(), data).mean();
  const auto terms = assemble_eif(spec, fits.alphas, fits.nuisances, data, theta);
  OrthogonalityReport report;
  for (const auto& t : terms) report.mean_terms.push_back(t.values.mean());
  for (std::size_t k = 1; k < terms.size(); ++k) report.max_inner = std::max(report.max_inner, std::abs(report.mean_terms[k]));

  report.shared_basis = true;
  for (std::size_t k = 0; k < fits.alphas.size(); ++k) {
    const auto* sieve = std::get_if<SieveModel>(&fits.alphas[k].model());
    const auto& q = fits.nuisances[k];
    if (!sieve || sieve->lambda != 0.0 || q.lambda != 0.0 || !(sieve->basis == q.basis)) {
      report.shared_basis = false;
    }
  }
  report.passed = !report.shared_basis || report.max_inner <= kOrthogonalityTolerance;
  return report;
}

}  // namespace autoriesz
