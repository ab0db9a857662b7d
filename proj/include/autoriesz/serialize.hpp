#pragma once

#include <cstdint>

#include <json.hpp>

#include "autoriesz/dataset.hpp"
#include "autoriesz/eif.hpp"
#include "autoriesz/estimand.hpp"
#include "autoriesz/nuisance.hpp"
#include "autoriesz/riesz.hpp"
#include "autoriesz/simulator.hpp"

namespace autoriesz {

/// Key order is preserved so documents serialize canonically.
using Json = nlohmann::ordered_json;

Json schema_to_json(const Schema& schema);
Schema schema_from_json(const Json& doc);

/// Dataset sidecar: {"columns": [...], "rows": n, "seed": s}.
Json dataset_schema_to_json(const Dataset& data);
Schema dataset_schema_from_json(const Json& doc, std::uint64_t* seed = nullptr);

Json spec_to_json(const EstimandSpec& spec);
EstimandSpec spec_from_json(const Json& doc);

/// [{"label": ..., "factors": [{"column", "kind", "arg"}]}], intercept first.
Json basis_to_json(const Basis& basis);
Basis basis_from_json(const Json& doc, const Schema& schema);

Json riesz_settings_to_json(const RieszSettings& settings);
Json nuisance_settings_to_json(const NuisanceSettings& settings);
/// Everything that affects the estimate; the thread count is deliberately absent.
Json settings_to_json(const EstimatorSettings& settings);

Json riesz_fit_to_json(const RieszFit& fit);
Json nuisance_fit_to_json(const NuisanceFit& fit);
Json estimate_report_to_json(const EstimateReport& report);
Json truth_report_to_json(const TruthReport& report);

}  // namespace autoriesz
