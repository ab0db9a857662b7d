#include "autoriesz/serialize.hpp"

#include "autoriesz/error.hpp"

namespace autoriesz {

Json schema_to_json(const Schema& schema) {
  Json columns = Json::array();
  for (const auto& col : schema.columns()) {
    Json c = Json::object();
    c["name"] = col.name;
    c["role"] = std::string(to_string(col.role));
    switch (col.support.kind) {
      case Support::Kind::binary: c["support"] = "binary"; break;
      case Support::Kind::real: c["support"] = "real"; break;
      case Support::Kind::categorical: c["support"] = Json{{"categorical", col.support.levels}}; break;
    }
    columns.push_back(std::move(c));
  }
  return columns;
}

Schema schema_from_json(const Json& doc) {
  if (!doc.is_array()) throw SchemaError("schema: 'columns' must be an array");
  std::vector<Column> columns;
  for (const auto& c : doc) {
    if (!c.is_object() || !c.contains("name") || !c.contains("role") || !c.contains("support")) {
      throw SchemaError("schema: each column needs name, role and support");
    }
    Column col{c["name"].get<std::string>(), role_from_string(c["role"].get<std::string>()), Support::real()};
    const Json& support = c["support"];
    if (support == "binary") {
      col.support = Support::binary();
    } else if (support == "real") {
      col.support = Support::real();
    } else if (support.is_object() && support.contains("categorical")) {
      col.support = Support::categorical(support["categorical"].get<std::vector<double>>());
    } else {
      throw SchemaError("schema: column '" + col.name + "' has an unknown support");
    }
    columns.push_back(std::move(col));
  }
  return Schema(std::move(columns));
}

Json dataset_schema_to_json(const Dataset& data) {
  Json doc = Json::object();
  doc["columns"] = schema_to_json(data.schema);
  doc["rows"] = data.rows();
  doc["seed"] = data.seed;
  return doc;
}

Schema dataset_schema_from_json(const Json& doc, std::uint64_t* seed) {
  if (!doc.is_object() || !doc.contains("columns")) throw SchemaError("schema sidecar lacks 'columns'");
  if (seed && doc.contains("seed")) *seed = doc["seed"].get<std::uint64_t>();
  return schema_from_json(doc["columns"]);
}

}  // namespace autoriesz

namespace autoriesz {

namespace {

Json optional_number(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

Json vector_to_json(const Eigen::VectorXd& values) { return Json(std::vector<double>(values.data(), values.data() + values.size())); }

Json recipes_to_json(const std::vector<BasisRecipe>& bases) {
  Json out = Json::array();
  for (const auto& b : bases) out.push_back(b.to_string());
  return out;
}

Json interval_to_json(const ConfidenceInterval& ci) { return Json{{"lo", ci.lo}, {"hi", ci.hi}, {"level", ci.level}}; }

}  // namespace

Json basis_to_json(const Basis& basis) {
  Json out = Json::array();
  for (const auto& feature : basis.features()) {
    Json factors = Json::array();
    for (const auto& f : feature.factors) {
      factors.push_back(Json{{"column", f.column},
                             {"kind", f.kind == Factor::Kind::power ? "power" : "indicator"},
                             {"arg", f.arg}});
    }
    out.push_back(Json{{"label", feature.label()}, {"factors", std::move(factors)}});
  }
  return out;
}

Basis basis_from_json(const Json& doc, const Schema& schema) {
  if (!doc.is_array() || doc.empty()) throw SchemaError("basis: expected a non-empty array of features");
  std::vector<Feature> features;
  for (const auto& entry : doc) {
    Feature feature;
    for (const auto& f : entry.at("factors")) {
      const auto kind = f.at("kind").get<std::string>();
      if (kind != "power" && kind != "indicator") throw SchemaError("basis: unknown factor kind '" + kind + "'");
      const auto column = f.at("column").get<std::string>();
      feature.factors.push_back(Factor{column, schema.index_of(column),
                                       kind == "power" ? Factor::Kind::power : Factor::Kind::indicator,
                                       f.at("arg").get<double>()});
    }
    features.push_back(std::move(feature));
  }
  return Basis(std::move(features));
}

Json riesz_settings_to_json(const RieszSettings& settings) {
  const auto& m = settings.mlp;
  return Json{{"method", std::string(to_string(settings.method))},
              {"bases", recipes_to_json(settings.bases)},
              {"degree", settings.degree},
              {"lambda", optional_number(settings.sieve.lambda)},
              {"clip", optional_number(settings.sieve.clip)},
              {"mlp",
               Json{{"hidden_layers", m.hidden_layers},
                    {"width", m.width},
                    {"learning_rate", m.learning_rate},
                    {"beta1", m.beta1},
                    {"beta2", m.beta2},
                    {"epsilon", m.epsilon},
                    {"epochs", m.epochs},
                    {"batch_size", m.batch_size},
                    {"seed", m.seed}}}};
}

Json nuisance_settings_to_json(const NuisanceSettings& settings) {
  static constexpr const char* families[] = {"auto", "least_squares", "logistic"};
  return Json{{"bases", recipes_to_json(settings.bases)},
              {"degree", settings.degree},
              {"lambda", optional_number(settings.lambda)},
              {"family", families[static_cast<int>(settings.family)]},
              {"max_iterations", settings.max_iterations},
              {"tolerance", settings.tolerance}};
}

Json settings_to_json(const EstimatorSettings& settings) {
  return Json{{"folds", settings.folds},
              {"seed", settings.seed},
              {"level", settings.level},
              {"min_fold_rows", settings.min_fold_rows},
              {"riesz", riesz_settings_to_json(settings.riesz)},
              {"nuisance", nuisance_settings_to_json(settings.nuisance)}};
}

Json riesz_fit_to_json(const RieszFit& fit) {
  Json doc = Json::object();
  doc["kind"] = fit.kind();
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SieveModel>) {
          doc["basis"] = basis_to_json(m.basis);
          doc["coefficients"] = vector_to_json(m.coef);
          doc["lambda"] = m.lambda;
        } else if constexpr (std::is_same_v<M, MlpModel>) {
          doc["inputs"] = m.inputs;
          Json layers = Json::array();
          for (std::size_t l = 0; l < m.network.weights.size(); ++l) {
            const auto& w = m.network.weights[l];
            Json weights = Json::array();
            for (Eigen::Index r = 0; r < w.rows(); ++r) weights.push_back(vector_to_json(w.row(r).transpose()));
            layers.push_back(Json{{"shape", {w.rows(), w.cols()}},
                                  {"weights", std::move(weights)},
                                  {"bias", vector_to_json(m.network.biases[l])}});
          }
          doc["layers"] = std::move(layers);
          const auto& c = m.config;
          doc["config"] = Json{{"hidden_layers", c.hidden_layers}, {"width", c.width},
                               {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                               {"beta2", c.beta2},                 {"epsilon", c.epsilon},
                               {"epochs", c.epochs},               {"batch_size", c.batch_size},
                               {"seed", c.seed}};
        } else {
          doc["rule"] = m.rule;
        }
      },
      fit.model());
  doc["fitted_loss"] = fit.fitted_loss();
  doc["clip"] = optional_number(fit.clip());
  const auto& d = fit.diagnostics();
  doc["diagnostics"] = Json{{"condition", d.condition},
                            {"ill_conditioned", d.ill_conditioned},
                            {"boundedness", d.boundedness},
                            {"clipped", d.clipped},
                            {"training_curve", d.training_curve}};
  return doc;
}

Json nuisance_fit_to_json(const NuisanceFit& fit) {
  return Json{{"kind", "sieve"},
              {"stage", fit.stage},
              {"family", std::string(to_string(fit.family))},
              {"basis", basis_to_json(fit.basis)},
              {"coefficients", vector_to_json(fit.coef)},
              {"lambda", fit.lambda},
              {"diagnostics",
               Json{{"condition", fit.diagnostics.condition},
                    {"ill_conditioned", fit.diagnostics.ill_conditioned},
                    {"iterations", fit.diagnostics.iterations},
                    {"max_gradient", fit.diagnostics.max_gradient}}}};
}

Json estimate_report_to_json(const EstimateReport& report) {
  Json doc = Json::object();
  doc["spec"] = report.spec_name;
  doc["n"] = report.n;
  doc["folds"] = report.folds;
  doc["theta_hat"] = report.theta_hat;
  doc["plug_in"] = report.plug_in;
  doc["std_error"] = report.std_error;
  doc["ci"] = interval_to_json(report.ci);
  if (report.arms.size() > 1) {
    Json arms = Json::array();
    for (const auto& arm : report.arms) {
      arms.push_back(Json{{"label", arm.label},
                          {"theta_hat", arm.theta_hat},
                          {"plug_in", arm.plug_in},
                          {"std_error", arm.std_error},
                          {"ci", interval_to_json(arm.ci)},
                          {"eif_values", vector_to_json(arm.eif_values)}});
    }
    doc["arms"] = std::move(arms);
  }
  Json folds = Json::array();
  for (const auto& f : report.per_fold) {
    folds.push_back(Json{{"fold", f.fold},
                         {"train_rows", f.train_rows},
                         {"eval_rows", f.eval_rows},
                         {"riesz_loss", f.riesz_loss},
                         {"riesz_condition", f.riesz_condition},
                         {"nuisance_condition", f.nuisance_condition}});
  }
  doc["per_fold"] = std::move(folds);
  doc["eif_values"] = vector_to_json(report.eif_values);
  const auto& p = report.provenance;
  doc["provenance"] = Json{{"spec_hash", p.spec_hash},
                           {"dataset_hash", p.dataset_hash},
                           {"seed", p.seed},
                           {"settings_hash", p.settings_hash},
                           {"settings", p.settings.empty() ? Json(nullptr) : Json::parse(p.settings)}};
  return doc;
}

Json truth_report_to_json(const TruthReport& report) {
  return Json{{"spec", report.spec_name},
              {"dgp", report.dgp},
              {"theta", report.theta},
              {"arms", report.arms},
              {"nodes", report.nodes},
              {"doubled_theta", report.doubled_theta},
              {"quadrature_gap", report.quadrature_gap}};
}

}  // namespace autoriesz
