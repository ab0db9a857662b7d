#include "autoriesz/basis.hpp"

#include <charconv>

#include "autoriesz/error.hpp"

namespace autoriesz {

std::string Feature::label() const {
  if (factors.empty()) return "1";
  std::string out;
  for (const auto& f : factors) {
    if (!out.empty()) out += "*";
    if (f.kind == Factor::Kind::indicator) {
      out += "1(" + f.column + "=" + format_double(f.arg) + ")";
    } else {
      out += f.column;
      if (f.arg != 1.0) out += "^" + format_double(f.arg);
    }
  }
  return out;
}

BasisRecipe BasisRecipe::parse(std::string_view text) {
  if (text == "intercept") return intercept();
  if (text == "saturated") return saturated();
  if (text == "poly") return polynomial(2);
  if (text.starts_with("poly:")) {
    int degree = 0;
    const auto digits = text.substr(5);
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), degree);
    if (res.ec == std::errc{} && res.ptr == digits.data() + digits.size() && degree >= 1) return polynomial(degree);
  }
  throw UsageError("unknown basis '" + std::string(text) + "' (expected intercept, saturated, poly or poly:<degree>)");
}

std::string BasisRecipe::to_string() const {
  switch (kind) {
    case BasisKind::intercept: return "intercept";
    case BasisKind::saturated: return "saturated";
    case BasisKind::polynomial: return "poly:" + std::to_string(degree);
  }
  return "intercept";
}

Basis::Basis(std::vector<Feature> features) : features_(std::move(features)) {
  if (features_.empty() || !features_.front().factors.empty()) {
    features_.insert(features_.begin(), Feature{});
  }
}

namespace {

/// Single-column features: the column itself (binary), level indicators
/// (categorical, first level is the reference), or powers (real).
std::vector<Feature> column_terms(const Column& col, Eigen::Index index, int max_power) {
  std::vector<Feature> out;
  switch (col.support.kind) {
    case Support::Kind::binary:
      out.push_back(Feature{{Factor{col.name, index, Factor::Kind::power, 1.0}}});
      break;
    case Support::Kind::categorical:
      for (std::size_t l = 1; l < col.support.levels.size(); ++l) {
        out.push_back(Feature{{Factor{col.name, index, Factor::Kind::indicator, col.support.levels[l]}}});
      }
      break;
    case Support::Kind::real:
      for (int p = 1; p <= max_power; ++p) {
        out.push_back(Feature{{Factor{col.name, index, Factor::Kind::power, static_cast<double>(p)}}});
      }
      break;
  }
  return out;
}

Feature product(const Feature& a, const Feature& b) {
  Feature out = a;
  out.factors.insert(out.factors.end(), b.factors.begin(), b.factors.end());
  return out;
}

}  // namespace

Basis Basis::saturated(const Schema& schema, const std::vector<std::string>& columns) {
  std::vector<Feature> features{Feature{}};
  for (const auto& name : columns) {
    const Eigen::Index idx = schema.index_of(name);
    const Column& col = schema.at(idx);
    if (!col.support.is_discrete()) {
      throw SchemaError("saturated basis needs discrete columns; '" + name + "' is real-valued");
    }
    const auto terms = column_terms(col, idx, 1);
    std::vector<Feature> next = features;
    for (const auto& existing : features) {
      for (const auto& t : terms) next.push_back(product(existing, t));
    }
    features = std::move(next);
  }
  return Basis(std::move(features));
}

Basis Basis::polynomial(const Schema& schema, const std::vector<std::string>& columns, int degree) {
  if (degree < 1) throw UsageError("polynomial basis degree must be >= 1");
  std::vector<Feature> treatment_terms;
  std::vector<Feature> base;
  std::vector<std::vector<Feature>> raw;  // degree-1 terms of each non-treatment column
  for (const auto& name : columns) {
    const Eigen::Index idx = schema.index_of(name);
    const Column& col = schema.at(idx);
    if (col.role == Role::treatment) {
      const auto t = column_terms(col, idx, 1);
      treatment_terms.insert(treatment_terms.end(), t.begin(), t.end());
      continue;
    }
    const auto terms = column_terms(col, idx, degree);
    base.insert(base.end(), terms.begin(), terms.end());
    raw.push_back(column_terms(col, idx, 1));
  }
  if (degree >= 2) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t j = i + 1; j < raw.size(); ++j) {
        for (const auto& a : raw[i]) {
          for (const auto& b : raw[j]) base.push_back(product(a, b));
        }
      }
    }
  }
  std::vector<Feature> features{Feature{}};
  features.insert(features.end(), base.begin(), base.end());
  for (const auto& t : treatment_terms) {
    features.push_back(t);
    for (const auto& b : base) features.push_back(product(t, b));
  }
  return Basis(std::move(features));
}

Basis Basis::from_recipe(const BasisRecipe& recipe, const Schema& schema, const std::vector<std::string>& columns) {
  switch (recipe.kind) {
    case BasisKind::intercept: return intercept_only();
    case BasisKind::saturated: return saturated(schema, columns);
    case BasisKind::polynomial: return polynomial(schema, columns, recipe.degree);
  }
  return intercept_only();
}

Eigen::MatrixXd Basis::evaluate(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd design(rows.rows(), dim());
  for (Eigen::Index j = 0; j < dim(); ++j) {
    auto col = design.col(j).array();
    col.setOnes();
    for (const auto& f : features_[static_cast<std::size_t>(j)].factors) {
      const auto x = rows.col(f.index).array();
      if (f.kind == Factor::Kind::indicator) {
        col *= (x == f.arg).cast<double>();
      } else if (f.arg == 1.0) {
        col *= x;
      } else {
        col *= x.pow(f.arg);
      }
    }
  }
  return design;
}

Basis Basis::rebind(const Schema& schema) const {
  Basis out = *this;
  for (auto& feature : out.features_) {
    for (auto& f : feature.factors) f.index = schema.index_of(f.column);
  }
  return out;
}

}  // namespace autoriesz
