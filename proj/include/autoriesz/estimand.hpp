#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/dataset.hpp"
#include "autoriesz/error.hpp"

namespace autoriesz {

/// A column reference resolved against a schema.
struct VariableRef {
  std::string name;
  Role role;
};

/// Value assigned to a variable by a map term: a constant, or the name of the
/// contrast parameter (e.g. a' in the natural direct effect).
using AssignedValue = std::variant<double, std::string>;

struct Assignment {
  std::string variable;
  AssignedValue value;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct MapTerm {
  double coef = 1.0;
  std::vector<Assignment> set;

  friend bool operator==(const MapTerm&, const MapTerm&) = default;
};

/// Linear functional m(x; f) = sum_t coef_t * f(x with set_t applied).
/// Linearity in f holds by construction.
struct FunctionalMap {
  std::vector<MapTerm> terms;

  static FunctionalMap identity() { return {{MapTerm{1.0, {}}}}; }
  /// Variables assigned by at least one term.
  std::vector<std::string> assigned() const;
  friend bool operator==(const FunctionalMap&, const FunctionalMap&) = default;
};

enum class RegressTarget { outcome, previous };

/// One nested expectation: Q_k = E[target | conditioning] and its map m_k.
struct Stage {
  RegressTarget regress = RegressTarget::outcome;
  std::vector<std::string> given;
  std::vector<std::pair<std::string, double>> where;  // subgroup restriction
  FunctionalMap map;

  /// `given` followed by the `where` variables.
  std::vector<std::string> conditioning() const;
  /// `map` with the `where` assignments added to every term.
  FunctionalMap effective_map() const;
  /// Conditioning variables the mapped function still depends on.
  std::vector<std::string> free_vars() const;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct Contrast {
  std::string parameter;
  double treated = 1.0;    // theta(treated) - theta(reference)
  double reference = 0.0;

  friend bool operator==(const Contrast&, const Contrast&) = default;
};

/// Estimand as K nested regressions. stages[0] is the outermost stage (k = 1),
/// stages[K-1] the innermost, which regresses the outcome.
struct EstimandSpec {
  std::string name;
  std::optional<Contrast> contrast;
  std::vector<Stage> stages;

  int K() const { return static_cast<int>(stages.size()); }
  /// 1-based stage access matching k = 1..K.
  const Stage& stage(int k) const { return stages.at(static_cast<std::size_t>(k - 1)); }

  /// Replaces the contrast parameter by `value` and drops the contrast.
  EstimandSpec instantiate(double value) const;
  bool is_parametric() const { return contrast.has_value(); }

  /// Throws SpecError naming the first violated invariant.
  void validate() const;
  /// Checks every referenced column against `schema`. Throws SchemaError.
  void check_schema(const Schema& schema) const;

  friend bool operator==(const EstimandSpec&, const EstimandSpec&) = default;
};

EstimandSpec parse_spec(std::string_view text);
std::string print_spec(const EstimandSpec& spec);
EstimandSpec load_spec(const std::string& path);

/// One of mean_treated, ate, att_control_mean, nde. Columns W, A, M, Y.
EstimandSpec builtin_spec(std::string_view name);
std::vector<std::string> builtin_names();

/// Map resolved to column positions with numeric assignments.
struct BoundMap {
  struct Term {
    double coef;
    std::vector<std::pair<Eigen::Index, double>> set;
  };
  std::vector<Term> terms;
};

/// Resolves names and checks every assigned value lies in its column's support.
BoundMap bind(const FunctionalMap& map, const Schema& schema);

/// Row-wise sum_t coef_t * f(rows with set_t applied). `f` maps an n x p
/// matrix in schema column order to n values.
template <typename F>
Eigen::VectorXd apply_map(const BoundMap& map, F&& f, const Eigen::MatrixXd& rows) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows.rows());
  Eigen::MatrixXd modified;
  for (const auto& term : map.terms) {
    if (term.set.empty()) {
      out.noalias() += term.coef * f(rows);
      continue;
    }
    modified = rows;
    for (const auto& [col, value] : term.set) modified.col(col).setConstant(value);
    out.noalias() += term.coef * f(modified);
  }
  return out;
}

template <typename F>
Eigen::VectorXd apply_map(const FunctionalMap& map, F&& f, const Dataset& data) {
  return apply_map(bind(map, data.schema), std::forward<F>(f), data.values);
}

template <typename F>
double apply_map(const FunctionalMap& map, F&& f, const Schema& schema, const Eigen::RowVectorXd& row) {
  const Eigen::MatrixXd one = row;
  return apply_map(bind(map, schema), std::forward<F>(f), one)(0);
}

}  // namespace autoriesz
