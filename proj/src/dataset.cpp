#include "autoriesz/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "autoriesz/error.hpp"
#include "autoriesz/hash.hpp"
#include "autoriesz/serialize.hpp"

namespace autoriesz {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::covariate: return "covariate";
    case Role::treatment: return "treatment";
    case Role::mediator: return "mediator";
    case Role::outcome: return "outcome";
  }
  return "covariate";
}

Role role_from_string(std::string_view text) {
  if (text == "covariate") return Role::covariate;
  if (text == "treatment") return Role::treatment;
  if (text == "mediator") return Role::mediator;
  if (text == "outcome") return Role::outcome;
  throw SchemaError("unknown column role '" + std::string(text) + "'");
}

bool Support::contains(double value) const {
  switch (kind) {
    case Kind::binary: return value == 0.0 || value == 1.0;
    case Kind::categorical: return std::find(levels.begin(), levels.end(), value) != levels.end();
    case Kind::real: return std::isfinite(value);
  }
  return false;
}

std::vector<double> Support::values() const {
  switch (kind) {
    case Kind::binary: return {0.0, 1.0};
    case Kind::categorical: return levels;
    case Kind::real: break;
  }
  throw SchemaError("a real-valued support has no enumerable values");
}

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (columns_[i].name == columns_[j].name) throw SchemaError("duplicate column '" + columns_[i].name + "'");
    }
    if (columns_[i].support.kind == Support::Kind::categorical && columns_[i].support.levels.empty()) {
      throw SchemaError("categorical column '" + columns_[i].name + "' declares no levels");
    }
  }
}

bool Schema::has(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

Eigen::Index Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<Eigen::Index>(i);
  }
  throw SchemaError("dataset has no column '" + std::string(name) + "'");
}

Eigen::Index Schema::outcome_index() const {
  Eigen::Index found = -1;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].role != Role::outcome) continue;
    if (found >= 0) throw SchemaError("schema declares more than one outcome column");
    found = static_cast<Eigen::Index>(i);
  }
  if (found < 0) throw SchemaError("schema declares no outcome column");
  return found;
}

Eigen::Index Schema::treatment_index() const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].role == Role::treatment) return static_cast<Eigen::Index>(i);
  }
  return -1;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out{schema, Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), values.cols()), seed};
  for (std::size_t i = 0; i < rows.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
  return out;
}

void Dataset::validate() const {
  if (values.rows() < 1) throw SchemaError("dataset has no rows");
  if (values.cols() != schema.size()) throw SchemaError("dataset width does not match its schema");
  schema.outcome_index();
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const Column& col = schema.at(j);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!col.support.contains(values(i, j))) {
        throw SchemaError("row " + std::to_string(i) + ": value " + format_double(values(i, j)) +
                          " of column '" + col.name + "' is outside its declared support");
      }
    }
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& cols = data.schema.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j].name;
  out << '\n';
  for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.values.cols(); ++j) out << (j ? "," : "") << format_double(data.values(i, j));
    out << '\n';
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

Dataset read_csv(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("CSV input is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  std::vector<Eigen::Index> position;  // csv field -> schema column
  for (const auto& name : header) position.push_back(schema.index_of(name));
  for (const auto& col : schema.columns()) {
    if (std::find(header.begin(), header.end(), col.name) == header.end()) {
      throw SchemaError("CSV header lacks column '" + col.name + "'");
    }
  }

  std::vector<double> flat;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw SchemaError("CSV line " + std::to_string(n + 2) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> row(static_cast<std::size_t>(schema.size()));
    for (std::size_t f = 0; f < fields.size(); ++f) {
      double v = 0.0;
      const auto res = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
      if (res.ec != std::errc{} || res.ptr != fields[f].data() + fields[f].size()) {
        throw SchemaError("CSV line " + std::to_string(n + 2) + ": cannot parse '" + std::string(fields[f]) + "'");
      }
      row[static_cast<std::size_t>(position[f])] = v;
    }
    flat.insert(flat.end(), row.begin(), row.end());
    ++n;
  }
  Dataset data{schema, Eigen::MatrixXd(static_cast<Eigen::Index>(n), schema.size()), 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < schema.size(); ++j) {
      data.values(static_cast<Eigen::Index>(i), j) = flat[i * static_cast<std::size_t>(schema.size()) + static_cast<std::size_t>(j)];
    }
  }
  data.validate();
  return data;
}

std::string schema_path_for(const std::string& csv_path) {
  const auto dot = csv_path.rfind(".csv");
  const std::string stem = dot != std::string::npos && dot + 4 == csv_path.size() ? csv_path.substr(0, dot) : csv_path;
  return stem + ".schema.json";
}

void save_dataset(const std::string& csv_path, const Dataset& data) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write '" + csv_path + "'");
  write_csv(csv, data);
  std::ofstream sidecar(schema_path_for(csv_path), std::ios::binary);
  if (!sidecar) throw IoError("cannot write '" + schema_path_for(csv_path) + "'");
  sidecar << dataset_schema_to_json(data).dump(2) << '\n';
  if (!csv || !sidecar) throw IoError("write to '" + csv_path + "' failed");
}

Dataset load_dataset(const std::string& csv_path) {
  std::ifstream sidecar(schema_path_for(csv_path));
  if (!sidecar) throw IoError("cannot read schema sidecar '" + schema_path_for(csv_path) + "'");
  Json doc;
  try {
    doc = Json::parse(sidecar);
  } catch (const Json::exception& e) {
    throw SchemaError("schema sidecar: " + std::string(e.what()));
  }
  std::uint64_t seed = 0;
  Schema schema = dataset_schema_from_json(doc, &seed);
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot read '" + csv_path + "'");
  Dataset data = read_csv(csv, schema);
  data.seed = seed;
  return data;
}

std::uint64_t dataset_hash(const Dataset& data) {
  std::ostringstream out;
  write_csv(out, data);
  return fnv1a(out.str());
}

}  // namespace autoriesz
