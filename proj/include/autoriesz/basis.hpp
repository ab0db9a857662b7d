#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/dataset.hpp"

namespace autoriesz {

/// x^power, or the indicator 1(x == level).
struct Factor {
  enum class Kind { power, indicator };

  std::string column;
  Eigen::Index index = 0;
  Kind kind = Kind::power;
  double arg = 1.0;

  friend bool operator==(const Factor&, const Factor&) = default;
};

/// Product of factors; the empty product is the intercept.
struct Feature {
  std::vector<Factor> factors;

  std::string label() const;
  friend bool operator==(const Feature&, const Feature&) = default;
};

enum class BasisKind { intercept, saturated, polynomial };

/// How to build a basis once a stage's conditioning columns are known.
struct BasisRecipe {
  BasisKind kind = BasisKind::polynomial;
  int degree = 2;

  static BasisRecipe intercept() { return {BasisKind::intercept, 0}; }
  static BasisRecipe saturated() { return {BasisKind::saturated, 0}; }
  static BasisRecipe polynomial(int degree) { return {BasisKind::polynomial, degree}; }

  /// "intercept", "saturated", "poly" or "poly:<degree>".
  static BasisRecipe parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const BasisRecipe&, const BasisRecipe&) = default;
};

/// Finite feature dictionary over named columns. The intercept is always the first feature.
class Basis {
 public:
  Basis() : features_{Feature{}} {}
  explicit Basis(std::vector<Feature> features);

  static Basis intercept_only() { return Basis(); }
  /// Every cell indicator over the discrete `columns` (full interaction expansion).
  static Basis saturated(const Schema& schema, const std::vector<std::string>& columns);
  /// Intercept, raw columns with powers up to `degree`, pairwise interactions
  /// among non-treatment columns, and every non-treatment feature crossed with
  /// the treatment.
  static Basis polynomial(const Schema& schema, const std::vector<std::string>& columns, int degree);
  static Basis from_recipe(const BasisRecipe& recipe, const Schema& schema, const std::vector<std::string>& columns);

  /// n x dim design matrix.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& rows) const;
  Eigen::Index dim() const { return static_cast<Eigen::Index>(features_.size()); }
  const std::vector<Feature>& features() const { return features_; }

  /// Re-resolves column positions against `schema`.
  Basis rebind(const Schema& schema) const;

  friend bool operator==(const Basis&, const Basis&) = default;

 private:
  std::vector<Feature> features_;
};

}  // namespace autoriesz
