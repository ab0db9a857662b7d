#include "autoriesz/simulator.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "autoriesz/error.hpp"
#include "autoriesz/numeric.hpp"
#include "autoriesz/quadrature.hpp"
#include "autoriesz/rng.hpp"

namespace autoriesz {

namespace {

bool in_unit_interval(double p) { return p > 0.0 && p < 1.0; }

}  // namespace

void DgpAppendix::validate() const {
  if (!in_unit_interval(p_w) || !in_unit_interval(p_a)) throw UsageError("appendix DGP: P(W=1) and P(A=1) must lie in (0, 1)");
  if (!(m_sd > 0.0)) throw UsageError("appendix DGP: mediator sd must be positive");
}

double DgpAppendix::outcome_mean(double a, double m, double w) const {
  return expit(y_intercept + y_a * a + y_m * m + y_w * w);
}

Schema DgpAppendix::schema() {
  return Schema({{"W", Role::covariate, Support::binary()},
                 {"A", Role::treatment, Support::binary()},
                 {"M", Role::mediator, Support::real()},
                 {"Y", Role::outcome, Support::binary()}});
}

DgpDiscrete::DgpDiscrete(double p_w, std::array<double, 2> propensity, std::array<std::array<double, 2>, 2> outcome_mean)
    : p_w_(p_w), propensity_(propensity), outcome_mean_(outcome_mean) {
  if (!in_unit_interval(p_w_)) throw UsageError("discrete DGP: P(W=1) must lie in (0, 1)");
  for (const double p : propensity_) {
    if (!in_unit_interval(p)) throw UsageError("discrete DGP: propensities must lie in (0, 1) (positivity)");
  }
  for (const auto& row : outcome_mean_) {
    for (const double mu : row) {
      if (!(mu >= 0.0 && mu <= 1.0)) throw UsageError("discrete DGP: outcome means must lie in [0, 1]");
    }
  }
}

DgpDiscrete DgpDiscrete::confounded() { return DgpDiscrete(0.4, {0.3, 0.7}, {{{0.2, 0.5}, {0.4, 0.8}}}); }

double DgpDiscrete::treated_share() const { return (1.0 - p_w_) * propensity_[0] + p_w_ * propensity_[1]; }

Schema DgpDiscrete::schema() {
  return Schema({{"W", Role::covariate, Support::binary()},
                 {"A", Role::treatment, Support::binary()},
                 {"Y", Role::outcome, Support::binary()}});
}

std::string describe(const Dgp& dgp) {
  std::ostringstream out;
  if (const auto* app = std::get_if<DgpAppendix>(&dgp)) {
    out << "appendix(pW=" << format_double(app->p_w) << ", pA=" << format_double(app->p_a) << ")";
  } else {
    const auto& d = std::get<DgpDiscrete>(dgp);
    out << "discrete(pW=" << format_double(d.p_w()) << ", pA|W=" << format_double(d.propensity(0)) << "/"
        << format_double(d.propensity(1)) << ", EY|A,W=" << format_double(d.outcome_mean(0, 0)) << "/"
        << format_double(d.outcome_mean(0, 1)) << "/" << format_double(d.outcome_mean(1, 0)) << "/"
        << format_double(d.outcome_mean(1, 1)) << ")";
  }
  return out.str();
}

Schema dgp_schema(const Dgp& dgp) {
  return std::holds_alternative<DgpAppendix>(dgp) ? DgpAppendix::schema() : DgpDiscrete::schema();
}

Dataset simulate_appendix(Eigen::Index n, std::uint64_t seed, const DgpAppendix& dgp) {
  if (n < 1) throw UsageError("sample size must be >= 1");
  dgp.validate();
  Rng rng(seed);
  Dataset data{DgpAppendix::schema(), Eigen::MatrixXd(n, 4), seed};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = rng.bernoulli(dgp.p_w);
    const double a = rng.bernoulli(dgp.propensity(w));
    const double m = dgp.mediator_mean(a, w) + dgp.m_sd * rng.normal();
    const double y = rng.bernoulli(dgp.outcome_mean(a, m, w));
    data.values.row(i) << w, a, m, y;
  }
  return data;
}

Dataset simulate_discrete(const DgpDiscrete& dgp, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw UsageError("sample size must be >= 1");
  Rng rng(seed);
  Dataset data{DgpDiscrete::schema(), Eigen::MatrixXd(n, 3), seed};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = rng.bernoulli(dgp.p_w());
    const double a = rng.bernoulli(dgp.propensity(w));
    const double y = rng.bernoulli(dgp.outcome_mean(a, w));
    data.values.row(i) << w, a, y;
  }
  return data;
}

Dataset simulate(const Dgp& dgp, Eigen::Index n, std::uint64_t seed) {
  if (const auto* app = std::get_if<DgpAppendix>(&dgp)) return simulate_appendix(n, seed, *app);
  return simulate_discrete(std::get<DgpDiscrete>(dgp), n, seed);
}

// ---------------------------------------------------------------------------
// Population oracle

namespace {

// Coordinates of a population point.
constexpr int kW = 0;
constexpr int kA = 1;
constexpr int kM = 2;
using Point = std::array<double, 3>;

struct Cell {
  double w;
  double a;
  double prob;
};

struct OracleTerm {
  double coef;
  std::vector<std::pair<int, double>> set;
};

struct OracleStage {
  std::vector<int> conditioning;
  std::vector<OracleTerm> map;
};

/// Nested conditional expectations under the true distribution.
class Population {
 public:
  Population(const Dgp& dgp, const EstimandSpec& spec, int nodes)
      : dgp_(dgp), schema_(dgp_schema(dgp)), rule_(gauss_hermite<double>(nodes)) {
    for (const double w : {0.0, 1.0}) {
      for (const double a : {0.0, 1.0}) {
        const double pw = w == 1.0 ? p_w() : 1.0 - p_w();
        const double pa = a == 1.0 ? propensity(w) : 1.0 - propensity(w);
        cells_.push_back({w, a, pw * pa});
      }
    }
    has_mediator_ = std::holds_alternative<DgpAppendix>(dgp_);
    for (const auto& stage : spec.stages) {
      OracleStage os;
      for (const auto& name : stage.conditioning()) os.conditioning.push_back(coordinate(name));
      for (const auto& term : stage.effective_map().terms) {
        OracleTerm ot{term.coef, {}};
        for (const auto& a : term.set) {
          const auto* value = std::get_if<double>(&a.value);
          if (!value) throw SpecError("truth oracle needs an instantiated spec");
          ot.set.emplace_back(coordinate(a.variable), *value);
        }
        os.map.push_back(std::move(ot));
      }
      stages_.push_back(std::move(os));
    }
    caches_.resize(stages_.size());
  }

  int K() const { return static_cast<int>(stages_.size()); }

  /// Q_k at point `x` (only its conditioning coordinates matter).
  double regression(int k, const Point& x) {
    const OracleStage& stage = stages_[static_cast<std::size_t>(k - 1)];
    Point key{0.0, 0.0, 0.0};
    for (const int c : stage.conditioning) key[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
    auto& cache = caches_[static_cast<std::size_t>(k - 1)];
    if (const auto it = cache.find(key); it != cache.end()) return it->second;

    auto target = [&](const Point& p) {
      if (k == K()) return outcome_mean(p);
      return mapped(k + 1, p);
    };
    const double value = conditional_mean(stage.conditioning, key, target);
    cache.emplace(key, value);
    return value;
  }

  /// m_k(x; Q_k).
  double mapped(int k, const Point& x) {
    double total = 0.0;
    for (const auto& term : stages_[static_cast<std::size_t>(k - 1)].map) {
      Point p = x;
      for (const auto& [coord, value] : term.set) p[static_cast<std::size_t>(coord)] = value;
      total += term.coef * regression(k, p);
    }
    return total;
  }

  /// The outermost map is constant in x by construction.
  double theta() { return mapped(1, Point{cells_[0].w, cells_[0].a, 0.0}); }

  Point point_of(const Eigen::MatrixXd& rows, Eigen::Index i) const {
    Point p{0.0, 0.0, 0.0};
    p[kW] = rows(i, schema_.index_of("W"));
    p[kA] = rows(i, schema_.index_of("A"));
    if (has_mediator_) p[kM] = rows(i, schema_.index_of("M"));
    return p;
  }

 private:
  int coordinate(const std::string& name) const {
    if (!schema_.has(name)) throw SchemaError("the DGP has no variable '" + name + "'");
    if (name == "W") return kW;
    if (name == "A") return kA;
    if (name == "M") return kM;
    throw SchemaError("truth oracle cannot condition on '" + name + "'");
  }

  double p_w() const {
    return std::visit([](const auto& d) {
      if constexpr (std::is_same_v<std::decay_t<decltype(d)>, DgpAppendix>) return d.p_w;
      else return d.p_w();
    }, dgp_);
  }
  double propensity(double w) const {
    return std::visit([w](const auto& d) { return d.propensity(w); }, dgp_);
  }
  double mediator_mean(const Cell& c) const { return std::get<DgpAppendix>(dgp_).mediator_mean(c.a, c.w); }
  double mediator_sd() const { return std::get<DgpAppendix>(dgp_).m_sd; }

  double outcome_mean(const Point& p) const {
    if (const auto* app = std::get_if<DgpAppendix>(&dgp_)) return app->outcome_mean(p[kA], p[kM], p[kW]);
    return std::get<DgpDiscrete>(dgp_).outcome_mean(p[kA], p[kW]);
  }

  template <typename F>
  double conditional_mean(const std::vector<int>& conditioning, const Point& given, F&& target) {
    auto conditioned = [&](int c) { return std::find(conditioning.begin(), conditioning.end(), c) != conditioning.end(); };
    const bool mediator_fixed = has_mediator_ && conditioned(kM);
    double numerator = 0.0;
    double denominator = 0.0;
    for (const Cell& cell : cells_) {
      if (conditioned(kW) && cell.w != given[kW]) continue;
      if (conditioned(kA) && cell.a != given[kA]) continue;
      double weight = cell.prob;
      double value = 0.0;
      if (mediator_fixed) {
        weight *= normal_pdf(given[kM], mediator_mean(cell), mediator_sd());
        value = target(Point{cell.w, cell.a, given[kM]});
      } else if (has_mediator_) {
        value = rule_.expect(mediator_mean(cell), mediator_sd(),
                             [&](double m) { return target(Point{cell.w, cell.a, m}); });
      } else {
        value = target(Point{cell.w, cell.a, 0.0});
      }
      numerator += weight * value;
      denominator += weight;
    }
    if (!(denominator > 0.0)) throw NumericalError("truth oracle: conditioning event has zero probability");
    return numerator / denominator;
  }

  Dgp dgp_;
  Schema schema_;
  GaussHermite<double> rule_;
  std::vector<Cell> cells_;
  bool has_mediator_ = false;
  std::vector<OracleStage> stages_;
  std::vector<std::map<Point, double>> caches_;
};

double oracle_theta(const EstimandSpec& spec, const Dgp& dgp, int nodes) {
  Population population(dgp, spec, nodes);
  return population.theta();
}

}  // namespace

TruthReport truth_oracle(const EstimandSpec& spec, const Dgp& dgp, int nodes) {
  if (nodes < 2) throw UsageError("quadrature needs at least 2 nodes");
  TruthReport report;
  report.spec_name = spec.name;
  report.dgp = describe(dgp);
  report.nodes = nodes;
  auto evaluate = [&](int n) {
    if (!spec.contrast) return oracle_theta(spec, dgp, n);
    return oracle_theta(spec.instantiate(spec.contrast->treated), dgp, n) -
           oracle_theta(spec.instantiate(spec.contrast->reference), dgp, n);
  };
  report.theta = evaluate(nodes);
  report.doubled_theta = evaluate(2 * nodes);
  report.quadrature_gap = std::abs(report.theta - report.doubled_theta);
  if (spec.contrast) {
    report.arms = {oracle_theta(spec.instantiate(spec.contrast->treated), dgp, nodes),
                   oracle_theta(spec.instantiate(spec.contrast->reference), dgp, nodes)};
  }
  if (!(report.quadrature_gap <= kQuadratureAgreement)) {
    throw NumericalError("truth oracle: " + std::to_string(nodes) + " and " + std::to_string(2 * nodes) +
                         " node quadratures disagree by " + format_double(report.quadrature_gap));
  }
  return report;
}

std::vector<RowFunction> true_regressions(const EstimandSpec& spec, const Dgp& dgp, int nodes) {
  auto population = std::make_shared<Population>(dgp, spec, nodes);
  std::vector<RowFunction> out;
  for (int k = 1; k <= population->K(); ++k) {
    out.push_back([population, k](const Eigen::MatrixXd& rows) {
      Eigen::VectorXd values(rows.rows());
      for (Eigen::Index i = 0; i < rows.rows(); ++i) values(i) = population->regression(k, population->point_of(rows, i));
      return values;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form representers

namespace {

struct TrueDensities {
  Dgp dgp;
  Schema schema;

  double propensity(double w) const {
    return std::visit([w](const auto& d) { return d.propensity(w); }, dgp);
  }
  double treated_share() const {
    if (const auto* app = std::get_if<DgpAppendix>(&dgp)) return app->p_a;
    return std::get<DgpDiscrete>(dgp).treated_share();
  }
  double mediator_density(double m, double a, double w) const {
    const auto& app = std::get<DgpAppendix>(dgp);
    return normal_pdf(m, app.mediator_mean(a, w), app.m_sd);
  }
};

template <typename PerRow>
RowFunction rowwise(std::shared_ptr<const TrueDensities> truth, PerRow per_row) {
  return [truth, per_row](const Eigen::MatrixXd& rows) {
    const Eigen::Index w_col = truth->schema.index_of("W");
    const Eigen::Index a_col = truth->schema.index_of("A");
    const Eigen::Index m_col = truth->schema.has("M") ? truth->schema.index_of("M") : -1;
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      out(i) = per_row(*truth, rows(i, w_col), rows(i, a_col), m_col >= 0 ? rows(i, m_col) : 0.0);
    }
    return out;
  };
}

RowFunction constant_one() {
  return [](const Eigen::MatrixXd& rows) { return Eigen::VectorXd::Ones(rows.rows()).eval(); };
}

}  // namespace

std::vector<RowFunction> closed_form_stage_representers(std::string_view name, const Dgp& dgp,
                                                        std::optional<double> a_prime) {
  auto truth = std::make_shared<const TrueDensities>(TrueDensities{dgp, dgp_schema(dgp)});
  using T = TrueDensities;

  auto treated_over_share = rowwise(truth, [](const T& t, double, double a, double) {
    return (a == 1.0 ? 1.0 : 0.0) / t.treated_share();
  });
  if (name == "mean_treated") return {treated_over_share};
  if (name == "ate") {
    return {constant_one(), rowwise(truth, [](const T& t, double w, double a, double) {
              const double p = t.propensity(w);
              return (a == 1.0 ? 1.0 / p : 0.0) - (a == 0.0 ? 1.0 / (1.0 - p) : 0.0);
            })};
  }
  if (name == "att_control_mean") {
    return {treated_over_share, rowwise(truth, [](const T& t, double w, double a, double) {
              const double p = t.propensity(w);
              return a == 0.0 ? (p / (1.0 - p)) / t.treated_share() : 0.0;
            })};
  }
  if (name == "nde") {
    if (!std::holds_alternative<DgpAppendix>(dgp)) throw SchemaError("nde needs a DGP with mediator column 'M'");
    auto control_weight = rowwise(truth, [](const T& t, double w, double a, double) {
      return a == 0.0 ? 1.0 / (1.0 - t.propensity(w)) : 0.0;
    });
    auto arm = [truth](double ap) {
      return rowwise(truth, [ap](const T& t, double w, double a, double m) {
        if (a != ap) return 0.0;
        const double pa = ap == 1.0 ? t.propensity(w) : 1.0 - t.propensity(w);
        return t.mediator_density(m, 0.0, w) / (pa * t.mediator_density(m, ap, w));
      });
    };
    if (!a_prime) throw UsageError("nde stage representers need the arm value a'");
    return {constant_one(), control_weight, arm(*a_prime)};
  }
  throw UsageError("no closed-form representer for '" + std::string(name) + "'");
}

RowFunction closed_form_representer(std::string_view name, const Dgp& dgp, std::optional<double> a_prime) {
  if (name == "nde" && !a_prime) {
    RowFunction treated = closed_form_stage_representers(name, dgp, 1.0).back();
    RowFunction reference = closed_form_stage_representers(name, dgp, 0.0).back();
    return [treated, reference](const Eigen::MatrixXd& rows) { return (treated(rows) - reference(rows)).eval(); };
  }
  return closed_form_stage_representers(name, dgp, a_prime).back();
}

}  // namespace autoriesz
