#include "autoriesz/estimand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "autoriesz/serialize.hpp"

namespace autoriesz {

namespace {

bool contains(const std::vector<std::string>& names, std::string_view name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string describe(const AssignedValue& value) {
  if (const auto* number = std::get_if<double>(&value)) return format_double(*number);
  return std::get<std::string>(value);
}

}  // namespace

std::vector<std::string> FunctionalMap::assigned() const {
  std::vector<std::string> out;
  for (const auto& term : terms) {
    for (const auto& a : term.set) {
      if (!contains(out, a.variable)) out.push_back(a.variable);
    }
  }
  return out;
}

std::vector<std::string> Stage::conditioning() const {
  std::vector<std::string> out = given;
  for (const auto& [name, value] : where) {
    if (!contains(out, name)) out.push_back(name);
  }
  return out;
}

FunctionalMap Stage::effective_map() const {
  FunctionalMap out = map;
  for (auto& term : out.terms) {
    for (const auto& [name, value] : where) term.set.push_back({name, value});
  }
  return out;
}

std::vector<std::string> Stage::free_vars() const {
  const FunctionalMap eff = effective_map();
  std::vector<std::string> out;
  for (const auto& name : conditioning()) {
    const bool everywhere = std::all_of(eff.terms.begin(), eff.terms.end(), [&](const MapTerm& t) {
      return std::any_of(t.set.begin(), t.set.end(), [&](const Assignment& a) { return a.variable == name; });
    });
    if (!everywhere) out.push_back(name);
  }
  return out;
}

EstimandSpec EstimandSpec::instantiate(double value) const {
  if (!contrast) return *this;
  EstimandSpec out = *this;
  out.contrast.reset();
  for (auto& stage : out.stages) {
    for (auto& term : stage.map.terms) {
      for (auto& a : term.set) {
        if (std::holds_alternative<std::string>(a.value)) a.value = value;
      }
    }
  }
  return out;
}

void EstimandSpec::validate() const {
  if (stages.empty()) throw SpecError("an estimand needs at least one stage (K >= 1)");
  if (name.empty()) throw SpecError("estimand name is empty");
  bool parameter_used = false;
  const int n_stages = K();
  for (int k = 1; k <= n_stages; ++k) {
    const Stage& s = stage(k);
    const std::string where_k = "stage k=" + std::to_string(k) + ": ";
    const bool innermost = k == n_stages;
    if (innermost && s.regress != RegressTarget::outcome) {
      throw SpecError(where_k + "the innermost stage must regress the outcome (regress: \"Y\")");
    }
    if (!innermost && s.regress != RegressTarget::previous) {
      throw SpecError(where_k + "outer stages must regress the previous map (regress: \"prev\")");
    }
    std::set<std::string> seen;
    for (const auto& g : s.given) {
      if (!seen.insert(g).second) throw SpecError(where_k + "variable '" + g + "' listed twice in given");
    }
    if (s.map.terms.empty()) throw SpecError(where_k + "map must have at least one term");
    const auto cond = s.conditioning();
    for (const auto& term : s.map.terms) {
      if (!std::isfinite(term.coef) || term.coef == 0.0) {
        throw SpecError(where_k + "map coefficients must be finite and nonzero");
      }
      std::set<std::string> in_term;
      for (const auto& a : term.set) {
        if (!in_term.insert(a.variable).second) {
          throw SpecError(where_k + "variable '" + a.variable + "' assigned twice in one map term");
        }
        if (!contains(cond, a.variable)) {
          throw SpecError(where_k + "map assigns '" + a.variable +
                          "' which is not in the stage's conditioning set");
        }
        if (const auto* param = std::get_if<std::string>(&a.value)) {
          if (!contrast || *param != contrast->parameter) {
            throw SpecError(where_k + "map assigns undeclared parameter '" + *param + "'");
          }
          parameter_used = true;
        } else if (!std::isfinite(std::get<double>(a.value))) {
          throw SpecError(where_k + "assigned values must be finite");
        }
      }
    }
    for (const auto& [wname, wvalue] : s.where) {
      if (!std::isfinite(wvalue)) throw SpecError(where_k + "where values must be finite");
      for (const auto& term : s.map.terms) {
        for (const auto& a : term.set) {
          if (a.variable == wname) throw SpecError(where_k + "'" + wname + "' is both a where key and a map assignment");
        }
      }
    }
  }
  // Point evaluations must be defined at the innermost level.
  const auto inner = stages.back().conditioning();
  for (int k = 1; k <= n_stages; ++k) {
    for (const auto& v : stage(k).effective_map().assigned()) {
      if (!contains(inner, v)) {
        throw SpecError("stage k=" + std::to_string(k) + ": assigned variable '" + v +
                        "' is missing from the innermost conditioning set");
      }
    }
  }
  if (!stage(1).free_vars().empty()) {
    throw SpecError("stage k=1: the outermost stage may only condition on variables its map assigns "
                    "(its expectation must be marginal or subgroup-marginal)");
  }
  if (contrast && !parameter_used) {
    throw SpecError("contrast parameter '" + contrast->parameter + "' is never assigned by a map");
  }
}

void EstimandSpec::check_schema(const Schema& schema) const {
  const Eigen::Index outcome = schema.outcome_index();
  for (int k = 1; k <= K(); ++k) {
    const Stage& s = stage(k);
    for (const auto& v : s.conditioning()) {
      const Eigen::Index idx = schema.index_of(v);
      if (idx == outcome) throw SchemaError("stage k=" + std::to_string(k) + " conditions on the outcome column '" + v + "'");
    }
  }
  // Assignment supports are checked per instantiation.
  if (contrast) {
    instantiate(contrast->treated).check_schema(schema);
    instantiate(contrast->reference).check_schema(schema);
    return;
  }
  for (const auto& s : stages) bind(s.effective_map(), schema);
}

BoundMap bind(const FunctionalMap& map, const Schema& schema) {
  BoundMap out;
  out.terms.reserve(map.terms.size());
  for (const auto& term : map.terms) {
    BoundMap::Term bound{term.coef, {}};
    for (const auto& a : term.set) {
      const auto* value = std::get_if<double>(&a.value);
      if (!value) throw SpecError("map still carries parameter '" + describe(a.value) + "'; instantiate the spec first");
      const Eigen::Index col = schema.index_of(a.variable);
      if (!schema.at(col).support.contains(*value)) {
        throw SchemaError("assignment " + a.variable + "=" + format_double(*value) +
                          " lies outside the column's declared support");
      }
      bound.set.emplace_back(col, *value);
    }
    out.terms.push_back(std::move(bound));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Document form

namespace {

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

Json number_json(double v) {
  if (std::trunc(v) == v && std::abs(v) < 9.0e15) return Json(static_cast<std::int64_t>(v));
  return Json(v);
}

double require_number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw SpecError(what + " must be a number");
  return j.get<double>();
}

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& what) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SpecError(what + ": unknown key '" + key + "'");
    }
  }
}

Stage stage_from_json(const Json& j, const std::string& what) {
  if (!j.is_object()) throw SpecError(what + " must be an object");
  reject_unknown_keys(j, {"regress", "given", "where", "map"}, what);
  Stage s;
  if (!j.contains("regress") || !j["regress"].is_string()) throw SpecError(what + ": 'regress' must be \"Y\" or \"prev\"");
  const auto regress = j["regress"].get<std::string>();
  if (regress == "Y") {
    s.regress = RegressTarget::outcome;
  } else if (regress == "prev") {
    s.regress = RegressTarget::previous;
  } else {
    throw SpecError(what + ": 'regress' must be \"Y\" or \"prev\", got \"" + regress + "\"");
  }
  if (!j.contains("given") || !j["given"].is_array()) throw SpecError(what + ": 'given' must be an array of column names");
  for (const auto& g : j["given"]) {
    if (!g.is_string()) throw SpecError(what + ": 'given' entries must be strings");
    s.given.push_back(g.get<std::string>());
  }
  if (j.contains("where")) {
    if (!j["where"].is_object()) throw SpecError(what + ": 'where' must be an object");
    for (const auto& [key, value] : j["where"].items()) s.where.emplace_back(key, require_number(value, what + ": where." + key));
  }
  if (!j.contains("map") || !j["map"].is_array()) throw SpecError(what + ": 'map' must be an array of terms");
  for (const auto& t : j["map"]) {
    if (!t.is_object()) throw SpecError(what + ": map terms must be objects");
    reject_unknown_keys(t, {"coef", "set"}, what + ": map term");
    MapTerm term;
    if (!t.contains("coef")) throw SpecError(what + ": map term lacks 'coef'");
    term.coef = require_number(t["coef"], what + ": coef");
    if (t.contains("set")) {
      if (!t["set"].is_object()) throw SpecError(what + ": 'set' must be an object");
      for (const auto& [key, value] : t["set"].items()) {
        if (value.is_string()) {
          term.set.push_back({key, value.get<std::string>()});
        } else {
          term.set.push_back({key, require_number(value, what + ": set." + key)});
        }
      }
    }
    s.map.terms.push_back(std::move(term));
  }
  return s;
}

Json stage_to_json(const Stage& s) {
  Json j = Json::object();
  j["regress"] = s.regress == RegressTarget::outcome ? "Y" : "prev";
  j["given"] = s.given;
  if (!s.where.empty()) {
    Json where = Json::object();
    for (const auto& [key, value] : s.where) where[key] = number_json(value);
    j["where"] = std::move(where);
  }
  Json map = Json::array();
  for (const auto& term : s.map.terms) {
    Json t = Json::object();
    t["coef"] = number_json(term.coef);
    Json set = Json::object();
    for (const auto& a : term.set) {
      if (const auto* number = std::get_if<double>(&a.value)) {
        set[a.variable] = number_json(*number);
      } else {
        set[a.variable] = std::get<std::string>(a.value);
      }
    }
    t["set"] = std::move(set);
    map.push_back(std::move(t));
  }
  j["map"] = std::move(map);
  return j;
}

}  // namespace

Json spec_to_json(const EstimandSpec& spec) {
  Json j = Json::object();
  j["name"] = spec.name;
  if (spec.contrast) {
    j["contrast"] = Json{{"param", spec.contrast->parameter},
                         {"values", Json::array({number_json(spec.contrast->treated), number_json(spec.contrast->reference)})}};
  }
  // Innermost stage first, as the recursion visits them.
  Json stages = Json::array();
  for (auto it = spec.stages.rbegin(); it != spec.stages.rend(); ++it) stages.push_back(stage_to_json(*it));
  j["stages"] = std::move(stages);
  return j;
}

EstimandSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw SpecError("spec document must be an object");
  reject_unknown_keys(j, {"name", "contrast", "stages"}, "spec");
  EstimandSpec spec;
  if (!j.contains("name") || !j["name"].is_string()) throw SpecError("spec: 'name' must be a string");
  spec.name = j["name"].get<std::string>();
  if (j.contains("contrast")) {
    const Json& c = j["contrast"];
    if (!c.is_object() || !c.contains("param") || !c["param"].is_string() || !c.contains("values") ||
        !c["values"].is_array() || c["values"].size() != 2) {
      throw SpecError("spec: 'contrast' must be {\"param\": name, \"values\": [treated, reference]}");
    }
    spec.contrast = Contrast{c["param"].get<std::string>(), require_number(c["values"][0], "contrast value"),
                             require_number(c["values"][1], "contrast value")};
  }
  if (!j.contains("stages") || !j["stages"].is_array()) throw SpecError("spec: 'stages' must be an array");
  const auto& stages = j["stages"];
  for (std::size_t i = stages.size(); i-- > 0;) {
    spec.stages.push_back(stage_from_json(stages[i], "stages[" + std::to_string(i) + "]"));
  }
  spec.validate();
  return spec;
}

EstimandSpec parse_spec(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw SpecError(msg, line, column);
  }
  return spec_from_json(doc);
}

std::string print_spec(const EstimandSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

EstimandSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read spec '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::vector<std::string> builtin_names() { return {"mean_treated", "ate", "att_control_mean", "nde"}; }

EstimandSpec builtin_spec(std::string_view name) {
  auto set = [](std::string var, AssignedValue v) { return Assignment{std::move(var), std::move(v)}; };
  EstimandSpec spec;
  spec.name = std::string(name);
  if (name == "mean_treated") {
    spec.stages = {Stage{RegressTarget::outcome, {"A"}, {}, {{MapTerm{1.0, {set("A", 1.0)}}}}}};
  } else if (name == "ate") {
    spec.stages = {
        Stage{RegressTarget::previous, {}, {}, FunctionalMap::identity()},
        Stage{RegressTarget::outcome, {"A", "W"}, {}, {{MapTerm{1.0, {set("A", 1.0)}}, MapTerm{-1.0, {set("A", 0.0)}}}}},
    };
  } else if (name == "att_control_mean") {
    spec.stages = {
        Stage{RegressTarget::previous, {"A"}, {}, {{MapTerm{1.0, {set("A", 1.0)}}}}},
        Stage{RegressTarget::outcome, {"A", "W"}, {}, {{MapTerm{1.0, {set("A", 0.0)}}}}},
    };
  } else if (name == "nde") {
    spec.contrast = Contrast{"a_prime", 1.0, 0.0};
    spec.stages = {
        Stage{RegressTarget::previous, {}, {}, FunctionalMap::identity()},
        Stage{RegressTarget::previous, {"A", "W"}, {}, {{MapTerm{1.0, {set("A", 0.0)}}}}},
        Stage{RegressTarget::outcome, {"A", "M", "W"}, {}, {{MapTerm{1.0, {set("A", std::string("a_prime"))}}}}},
    };
  } else {
    throw UsageError("unknown built-in estimand '" + std::string(name) +
                     "' (expected mean_treated, ate, att_control_mean or nde)");
  }
  spec.validate();
  return spec;
}

}  // namespace autoriesz
