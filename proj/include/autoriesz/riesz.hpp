#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/basis.hpp"
#include "autoriesz/dataset.hpp"
#include "autoriesz/estimand.hpp"
#include "autoriesz/mlp.hpp"
#include "autoriesz/simulator.hpp"

namespace autoriesz {

struct MlpConfig {
  int hidden_layers = 2;
  int width = 4;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 500;
  Eigen::Index batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;

  void validate() const;
};

struct SieveModel {
  Basis basis;
  Eigen::VectorXd coef;
  double lambda = 0.0;
};

struct MlpModel {
  std::vector<std::string> inputs;  // conditioning columns, in network input order
  std::vector<Eigen::Index> input_index;
  Mlp<double> network;
  MlpConfig config;
};

struct ClosedFormModel {
  std::string rule;
  RowFunction function;
};

struct RieszDiagnostics {
  double condition = std::numeric_limits<double>::quiet_NaN();  // Gram condition (sieve)
  bool ill_conditioned = false;
  double boundedness = std::numeric_limits<double>::quiet_NaN();  // sup |mean m(f)| over unit-norm f in the span
  std::vector<double> training_curve;                             // MLP: loss before each epoch, then final
  Eigen::Index clipped = 0;                                        // training rows hitting the clip bound
};

/// A fitted Riesz representer, evaluable on schema-conformant rows.
class RieszFit {
 public:
  using Model = std::variant<SieveModel, MlpModel, ClosedFormModel>;

  RieszFit() = default;
  RieszFit(Model model, double fitted_loss, RieszDiagnostics diagnostics = {}, std::optional<double> clip = {})
      : model_(std::move(model)), fitted_loss_(fitted_loss), diagnostics_(std::move(diagnostics)), clip_(clip) {}

  static RieszFit closed_form(std::string rule, RowFunction function) {
    return RieszFit(ClosedFormModel{std::move(rule), std::move(function)}, std::numeric_limits<double>::quiet_NaN());
  }

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd operator()(const Eigen::MatrixXd& rows) const { return evaluate(rows); }
  RowFunction as_function() const;

  std::string kind() const;
  const Model& model() const { return model_; }
  double fitted_loss() const { return fitted_loss_; }
  const RieszDiagnostics& diagnostics() const { return diagnostics_; }
  std::optional<double> clip() const { return clip_; }

 private:
  Model model_;
  double fitted_loss_ = std::numeric_limits<double>::quiet_NaN();
  RieszDiagnostics diagnostics_;
  std::optional<double> clip_;
};

/// Empirical Riesz loss mean[f(x)^2 - 2 w m(x; f)].
template <typename F>
double riesz_loss(F&& f, const FunctionalMap& map, const Dataset& data, const Eigen::VectorXd* weights = nullptr) {
  const Eigen::VectorXd fx = f(data.values);
  const Eigen::VectorXd mapped = apply_map(map, f, data);
  const double cross = weights ? weights->cwiseProduct(mapped).mean() : mapped.mean();
  return fx.squaredNorm() / static_cast<double>(data.rows()) - 2.0 * cross;
}

struct SieveOptions {
  std::optional<double> lambda;  // default 1e-6 * trace(G) / dim(G)
  std::optional<double> clip;    // bound on |alpha| at evaluation
};

/// Exact minimiser of the (weighted, ridged) empirical Riesz loss over span(basis).
RieszFit fit_sieve(const FunctionalMap& map, const Dataset& data, const Basis& basis, const SieveOptions& options = {},
                   const Eigen::VectorXd* weights = nullptr);

/// Riesz loss and its gradient with respect to the flattened network parameters.
struct MlpObjective {
  double loss;
  Eigen::VectorXd gradient;
};
MlpObjective mlp_riesz_objective(const MlpModel& model, const FunctionalMap& map, const Dataset& data,
                                 const Eigen::VectorXd* weights = nullptr);

/// Largest |analytic - central difference| over all parameters, relative to the
/// largest analytic gradient component.
double mlp_gradient_check(const MlpModel& model, const FunctionalMap& map, const Dataset& data,
                          const Eigen::VectorXd* weights = nullptr, double step = 1e-5);

/// Untrained network over `inputs`, initialised from config.seed.
MlpModel make_mlp(const Schema& schema, const std::vector<std::string>& inputs, const MlpConfig& config);

/// Adam on the Riesz loss. Returns the lowest-loss parameters seen (the initial
/// ones included), so fitted_loss never exceeds the initial loss.
RieszFit fit_mlp(const FunctionalMap& map, const Dataset& data, const std::vector<std::string>& inputs,
                 const MlpConfig& config, const Eigen::VectorXd* weights = nullptr, std::optional<double> clip = {});

enum class RieszMethod { sieve, mlp };
RieszMethod riesz_method_from_string(std::string_view text);
std::string_view to_string(RieszMethod method);

/// Learner settings for a chain of representers.
struct RieszSettings {
  RieszMethod method = RieszMethod::sieve;
  std::vector<BasisRecipe> bases;  // per stage k = 1..K; empty = auto
  int degree = 2;                  // auto basis degree for real-valued conditioning sets
  SieveOptions sieve;
  MlpConfig mlp;
};

/// Saturated when every column is discrete, polynomial(degree) otherwise.
BasisRecipe auto_recipe(const Schema& schema, const std::vector<std::string>& columns, int degree);
Basis stage_basis(const EstimandSpec& spec, int k, const Schema& schema, const std::vector<BasisRecipe>& bases, int degree);

/// Sequential Riesz regression: alpha_k minimises mean[f^2 - 2 alpha_{k-1}(x) m_k(x; f)]
/// with alpha_0 = 1. Returns alpha_1..alpha_K.
std::vector<RieszFit> fit_riesz_chain(const EstimandSpec& spec, const Dataset& data, const RieszSettings& settings);

/// alpha_2 for m2(w; f) = f(0, w), then alpha_3 weighted by alpha_2 for m3 = f(a', m, w).
std::pair<RieszFit, RieszFit> fit_sequential_nde(const Dataset& data, double a_prime, const RieszSettings& settings);

}  // namespace autoriesz
