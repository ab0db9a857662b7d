#include "autoriesz/riesz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autoriesz/error.hpp"
#include "autoriesz/numeric.hpp"

namespace autoriesz {

void MlpConfig::validate() const {
  if (hidden_layers < 0 || width < 1) throw UsageError("MLP needs width >= 1 and hidden_layers >= 0");
  if (epochs < 0) throw UsageError("MLP epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw UsageError("MLP learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw UsageError("Adam requires beta1, beta2 in [0, 1) and epsilon > 0");
  }
  if (batch_size < 0) throw UsageError("batch size must be >= 0");
}

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& rows, const std::vector<Eigen::Index>& index) {
  Eigen::MatrixXd out(rows.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = rows.col(index[j]);
  return out;
}

Eigen::VectorXd apply_clip(Eigen::VectorXd values, std::optional<double> clip) {
  if (clip) values = values.cwiseMax(-*clip).cwiseMin(*clip);
  return values;
}

/// sum_t coef_t * Phi(rows with set_t applied).
Eigen::MatrixXd mapped_design(const BoundMap& map, const Basis& basis, const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows.rows(), basis.dim());
  Eigen::MatrixXd modified;
  for (const auto& term : map.terms) {
    modified = rows;
    for (const auto& [col, value] : term.set) modified.col(col).setConstant(value);
    out.noalias() += term.coef * basis.evaluate(modified);
  }
  return out;
}

}  // namespace

Eigen::VectorXd RieszFit::evaluate(const Eigen::MatrixXd& rows) const {
  Eigen::VectorXd raw = std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SieveModel>) {
          return m.basis.evaluate(rows) * m.coef;
        } else if constexpr (std::is_same_v<M, MlpModel>) {
          return m.network.forward(select_columns(rows, m.input_index));
        } else {
          return m.function(rows);
        }
      },
      model_);
  return apply_clip(std::move(raw), clip_);
}

RowFunction RieszFit::as_function() const {
  return [fit = *this](const Eigen::MatrixXd& rows) { return fit.evaluate(rows); };
}

std::string RieszFit::kind() const {
  switch (model_.index()) {
    case 0: return "sieve";
    case 1: return "mlp";
    default: return "closed_form";
  }
}

RieszFit fit_sieve(const FunctionalMap& map, const Dataset& data, const Basis& basis, const SieveOptions& options,
                   const Eigen::VectorXd* weights) {
  const Eigen::Index n = data.rows();
  if (n < 1) throw SchemaError("cannot fit a Riesz representer on an empty dataset");
  if (weights && weights->size() != n) throw UsageError("Riesz weights must have one entry per row");
  const Basis bound = basis.rebind(data.schema);
  const Eigen::MatrixXd design = bound.evaluate(data.values);
  const Eigen::MatrixXd mapped = mapped_design(bind(map, data.schema), bound, data.values);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd gram = (design.transpose() * design) * inv_n;
  const Eigen::VectorXd rhs = weights ? Eigen::VectorXd(mapped.transpose() * *weights * inv_n)
                                      : Eigen::VectorXd(mapped.colwise().sum().transpose() * inv_n);
  const double lambda = options.lambda.value_or(default_ridge(gram));
  const GramSolve solved = solve_gram(gram, rhs, lambda, "Riesz sieve");
  const Eigen::VectorXd coef = solved.solution.col(0);
  if (!coef.allFinite()) throw NumericalError("Riesz sieve: non-finite coefficients");

  RieszDiagnostics diagnostics;
  diagnostics.condition = solved.condition;
  diagnostics.ill_conditioned = solved.ill_conditioned;
  diagnostics.boundedness = std::sqrt(std::max(0.0, coef.dot(rhs)));
  const double loss = coef.dot(gram * coef) - 2.0 * coef.dot(rhs);
  if (options.clip) {
    const Eigen::VectorXd fitted = design * coef;
    diagnostics.clipped = (fitted.array().abs() > *options.clip).count();
  }
  return RieszFit(SieveModel{bound, coef, lambda}, loss, std::move(diagnostics), options.clip);
}

MlpModel make_mlp(const Schema& schema, const std::vector<std::string>& inputs, const MlpConfig& config) {
  config.validate();
  MlpModel model;
  model.inputs = inputs;
  for (const auto& name : inputs) model.input_index.push_back(schema.index_of(name));
  Rng rng(derive_seed(config.seed, 0));
  model.network = Mlp<double>(static_cast<int>(inputs.size()), std::vector<int>(static_cast<std::size_t>(config.hidden_layers), config.width), rng);
  model.config = config;
  return model;
}

MlpObjective mlp_riesz_objective(const MlpModel& model, const FunctionalMap& map, const Dataset& data,
                                 const Eigen::VectorXd* weights) {
  const Eigen::Index n = data.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& net = model.network;
  auto grad_w = net.zero_weight_like();
  auto grad_b = net.zero_bias_like();

  const Eigen::MatrixXd observed = select_columns(data.values, model.input_index);
  const Eigen::VectorXd fx = net.forward(observed);
  double loss = fx.squaredNorm() * inv_n;
  net.backward(observed, 2.0 * inv_n * fx, grad_w, grad_b);

  Eigen::MatrixXd modified;
  for (const auto& term : bind(map, data.schema).terms) {
    modified = data.values;
    for (const auto& [col, value] : term.set) modified.col(col).setConstant(value);
    const Eigen::MatrixXd x = select_columns(modified, model.input_index);
    const Eigen::VectorXd f_term = net.forward(x);
    const Eigen::VectorXd scale = weights ? Eigen::VectorXd(-2.0 * inv_n * term.coef * *weights)
                                          : Eigen::VectorXd::Constant(n, -2.0 * inv_n * term.coef);
    loss += scale.dot(f_term);
    net.backward(x, scale, grad_w, grad_b);
  }
  return {loss, Mlp<double>::flatten(grad_w, grad_b)};
}

double mlp_gradient_check(const MlpModel& model, const FunctionalMap& map, const Dataset& data,
                          const Eigen::VectorXd* weights, double step) {
  const Eigen::VectorXd analytic = mlp_riesz_objective(model, map, data, weights).gradient;
  const Eigen::VectorXd params = model.network.flatten();
  MlpModel probe = model;
  Eigen::VectorXd numeric(params.size());
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    Eigen::VectorXd shifted = params;
    shifted(j) = params(j) + step;
    probe.network.unflatten(shifted);
    const double up = mlp_riesz_objective(probe, map, data, weights).loss;
    shifted(j) = params(j) - step;
    probe.network.unflatten(shifted);
    const double down = mlp_riesz_objective(probe, map, data, weights).loss;
    numeric(j) = (up - down) / (2.0 * step);
  }
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

RieszFit fit_mlp(const FunctionalMap& map, const Dataset& data, const std::vector<std::string>& inputs,
                 const MlpConfig& config, const Eigen::VectorXd* weights, std::optional<double> clip) {
  if (weights && weights->size() != data.rows()) throw UsageError("Riesz weights must have one entry per row");
  MlpModel model = make_mlp(data.schema, inputs, config);
  Eigen::VectorXd params = model.network.flatten();
  Adam<double> adam(params.size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);

  const Eigen::Index n = data.rows();
  const bool minibatch = config.batch_size > 0 && config.batch_size < n;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler(derive_seed(config.seed, 1));

  RieszDiagnostics diagnostics;
  Eigen::VectorXd best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  auto check_finite = [](const MlpObjective& obj, int epoch) {
    if (!std::isfinite(obj.loss) || !obj.gradient.allFinite()) {
      throw NumericalError("MLP Riesz regression diverged at epoch " + std::to_string(epoch) +
                           " (loss " + format_double(obj.loss) + "); lower the learning rate");
    }
  };

  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    model.network.unflatten(params);
    const MlpObjective full = mlp_riesz_objective(model, map, data, weights);
    check_finite(full, epoch);
    diagnostics.training_curve.push_back(full.loss);
    if (full.loss < best_loss) {
      best_loss = full.loss;
      best = params;
    }
    if (epoch == config.epochs) break;
    if (!minibatch) {
      adam.step(params, full.gradient);
      continue;
    }
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffler.below(i)]);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index len = std::min(config.batch_size, n - start);
      const std::span<const Eigen::Index> rows(order.data() + start, static_cast<std::size_t>(len));
      const Dataset batch = data.subset(rows);
      Eigen::VectorXd batch_weights;
      if (weights) {
        batch_weights.resize(len);
        for (Eigen::Index i = 0; i < len; ++i) batch_weights(i) = (*weights)(rows[static_cast<std::size_t>(i)]);
      }
      model.network.unflatten(params);
      const MlpObjective obj = mlp_riesz_objective(model, map, batch, weights ? &batch_weights : nullptr);
      check_finite(obj, epoch);
      adam.step(params, obj.gradient);
    }
  }
  model.network.unflatten(best);
  if (clip) {
    const Eigen::VectorXd fitted = model.network.forward(select_columns(data.values, model.input_index));
    diagnostics.clipped = (fitted.array().abs() > *clip).count();
  }
  return RieszFit(std::move(model), best_loss, std::move(diagnostics), clip);
}

RieszMethod riesz_method_from_string(std::string_view text) {
  if (text == "sieve") return RieszMethod::sieve;
  if (text == "mlp") return RieszMethod::mlp;
  throw UsageError("unknown Riesz method '" + std::string(text) + "' (expected sieve or mlp)");
}

std::string_view to_string(RieszMethod method) { return method == RieszMethod::sieve ? "sieve" : "mlp"; }

BasisRecipe auto_recipe(const Schema& schema, const std::vector<std::string>& columns, int degree) {
  if (columns.empty()) return BasisRecipe::intercept();
  const bool discrete = std::all_of(columns.begin(), columns.end(),
                                    [&](const std::string& c) { return schema.at(c).support.is_discrete(); });
  return discrete ? BasisRecipe::saturated() : BasisRecipe::polynomial(degree);
}

Basis stage_basis(const EstimandSpec& spec, int k, const Schema& schema, const std::vector<BasisRecipe>& bases, int degree) {
  const auto columns = spec.stage(k).conditioning();
  if (!bases.empty() && static_cast<int>(bases.size()) != spec.K()) {
    throw UsageError("expected one basis per stage (" + std::to_string(spec.K()) + "), got " + std::to_string(bases.size()));
  }
  const BasisRecipe recipe = bases.empty() ? auto_recipe(schema, columns, degree) : bases[static_cast<std::size_t>(k - 1)];
  return Basis::from_recipe(recipe, schema, columns);
}

std::vector<RieszFit> fit_riesz_chain(const EstimandSpec& spec, const Dataset& data, const RieszSettings& settings) {
  std::vector<RieszFit> fits;
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(data.rows());
  for (int k = 1; k <= spec.K(); ++k) {
    const Stage& stage = spec.stage(k);
    const FunctionalMap map = stage.effective_map();
    const auto columns = stage.conditioning();
    RieszFit fit;
    if (settings.method == RieszMethod::mlp && !columns.empty()) {
      MlpConfig config = settings.mlp;
      config.seed = derive_seed(settings.mlp.seed, static_cast<std::uint64_t>(k));
      fit = fit_mlp(map, data, columns, config, &weights, settings.sieve.clip);
    } else {
      fit = fit_sieve(map, data, stage_basis(spec, k, data.schema, settings.bases, settings.degree), settings.sieve, &weights);
    }
    weights = fit.evaluate(data.values);
    if (!weights.allFinite()) throw NumericalError("Riesz representer for stage k=" + std::to_string(k) + " is not finite");
    fits.push_back(std::move(fit));
  }
  return fits;
}

std::pair<RieszFit, RieszFit> fit_sequential_nde(const Dataset& data, double a_prime, const RieszSettings& settings) {
  if (!data.schema.has("M")) throw SchemaError("dataset has no column 'M' (the natural direct effect needs a mediator)");
  const EstimandSpec spec = builtin_spec("nde").instantiate(a_prime);
  auto fits = fit_riesz_chain(spec, data, settings);
  return {std::move(fits[1]), std::move(fits[2])};
}

}  // namespace autoriesz
