#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace autoriesz {

enum class Role { covariate, treatment, mediator, outcome };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

/// Declared value set of a column.
struct Support {
  enum class Kind { binary, categorical, real };

  Kind kind = Kind::real;
  std::vector<double> levels;  // categorical only

  static Support binary() { return {Kind::binary, {}}; }
  static Support real() { return {Kind::real, {}}; }
  static Support categorical(std::vector<double> levels) { return {Kind::categorical, std::move(levels)}; }

  bool is_discrete() const { return kind != Kind::real; }
  bool contains(double value) const;
  /// Enumerated values of a discrete support ({0, 1} for binary).
  std::vector<double> values() const;

  friend bool operator==(const Support&, const Support&) = default;
};

struct Column {
  std::string name;
  Role role;
  Support support;

  friend bool operator==(const Column&, const Column&) = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(columns_.size()); }

  bool has(std::string_view name) const;
  /// Column position; throws SchemaError naming the missing column.
  Eigen::Index index_of(std::string_view name) const;
  const Column& at(std::string_view name) const { return columns_[static_cast<std::size_t>(index_of(name))]; }
  const Column& at(Eigen::Index i) const { return columns_[static_cast<std::size_t>(i)]; }

  /// Index of the unique outcome column.
  Eigen::Index outcome_index() const;
  /// Index of the unique treatment column, or -1 when there is none.
  Eigen::Index treatment_index() const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<Column> columns_;
};

/// Columnar table of observations; one row per unit, columns in schema order.
struct Dataset {
  Schema schema;
  Eigen::MatrixXd values;
  std::uint64_t seed = 0;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::VectorXd column(std::string_view name) const { return values.col(schema.index_of(name)); }
  Eigen::VectorXd outcome() const { return values.col(schema.outcome_index()); }

  Dataset subset(std::span<const Eigen::Index> rows) const;

  /// Checks n >= 1, finite values, and supports. Throws SchemaError.
  void validate() const;
};

/// CSV: comma separated, header row, '.' decimal, LF line endings.
void write_csv(std::ostream& out, const Dataset& data);
Dataset read_csv(std::istream& in, const Schema& schema);

void save_dataset(const std::string& csv_path, const Dataset& data);
/// Reads `csv_path` together with its schema sidecar (see schema_path_for).
Dataset load_dataset(const std::string& csv_path);
std::string schema_path_for(const std::string& csv_path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// FNV-1a over the canonical CSV bytes of `data`.
std::uint64_t dataset_hash(const Dataset& data);

}  // namespace autoriesz
