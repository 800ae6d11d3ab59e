#include "trustdss/cohort.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "trustdss/error.hpp"
#include "trustdss/random.hpp"

namespace trustdss {

namespace {

// Generative parameters aligned with FeatureSchema::heart_failure().
// Continuous: value = center + scale * z. Binary: value = [z > q(1 - p)].
// z mixes three independent latent factors (cardiac severity, age/renal,
// metabolic) with idiosyncratic noise.
struct GenParam {
  double center;
  double scale;
  double prevalence;
  std::array<double, 3> loadings;
};

constexpr std::array<GenParam, kNumFeatures> kGen = {{
    {70, 11, 0, {0.10, 0.85, 0.00}},     // age
    {0, 1, 0.62, {0.00, -0.20, 0.30}},   // male
    {28, 5.5, 0, {0.00, -0.20, 0.80}},   // bmi
    {128, 20, 0, {-0.50, 0.20, 0.60}},   // systolic_bp
    {76, 12, 0, {-0.45, -0.20, 0.65}},   // diastolic_bp
    {78, 15, 0, {0.70, 0.00, 0.10}},     // heart_rate
    {35, 12, 0, {-0.80, 0.10, 0.10}},    // ejection_fraction
    {115, 40, 0, {0.30, 0.75, 0.10}},    // creatinine
    {138, 4, 0, {-0.55, -0.40, 0.00}},   // sodium
    {13, 1.8, 0, {-0.30, -0.65, 0.10}},  // hemoglobin
    {4.4, 0.5, 0, {0.20, 0.50, 0.00}},   // potassium
    {0, 1, 0.20, {0.00, -0.50, 0.30}},   // current_smoker
    {0, 1, 0.30, {0.00, 0.20, 0.75}},    // diabetes
    {0, 1, 0.15, {0.20, 0.40, 0.20}},    // copd
    {0, 1, 0.50, {0.50, 0.30, 0.00}},    // hf_duration_over_18m
    {0, 1, 0.30, {0.30, 0.60, 0.00}},    // atrial_fibrillation
    {0, 1, 0.40, {0.40, 0.20, 0.40}},    // prior_mi
    {0, 1, 0.55, {-0.20, 0.30, 0.75}},   // hypertension
    {2.4, 0.7, 0, {0.85, 0.10, 0.00}},   // nyha_class
    {0, 1, 0.15, {0.80, 0.00, 0.00}},    // dyspnea_at_rest
    {0, 1, 0.25, {0.75, 0.00, 0.00}},    // orthopnea
    {0, 1, 0.30, {0.60, 0.30, 0.20}},    // peripheral_edema
    {0, 1, 0.45, {0.55, 0.30, 0.00}},    // fatigue
    {0, 1, 0.20, {0.10, 0.00, 0.50}},    // angina
    {0, 1, 0.70, {0.30, -0.30, 0.20}},   // beta_blocker
    {0, 1, 0.80, {0.30, -0.20, 0.30}},   // ace_inhibitor_or_arb
    {0, 1, 0.75, {0.70, 0.20, 0.00}},    // loop_diuretic
    {0, 1, 0.30, {0.60, -0.10, 0.00}},   // aldosterone_antagonist
    {0, 1, 0.20, {0.50, 0.20, 0.00}},    // digoxin
    {0, 1, 0.45, {0.00, 0.20, 0.70}},    // statin
    {0, 1, 0.30, {0.20, 0.60, 0.00}},    // anticoagulant
}};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------- table

CohortTable::CohortTable(FeatureSchema schema, std::vector<double> values,
                         std::vector<std::uint8_t> outcomes)
    : schema_(std::move(schema)), values_(std::move(values)), outcomes_(std::move(outcomes)) {
  if (values_.size() != outcomes_.size() * schema_.size()) {
    throw std::invalid_argument("cohort: values do not match rows x features");
  }
  const std::size_t p = schema_.size();
  for (std::size_t r = 0; r < outcomes_.size(); ++r) {
    if (outcomes_[r] > 1) throw std::invalid_argument("cohort: outcome must be 0 or 1");
    for (std::size_t c = 0; c < p; ++c) {
      const double v = values_[r * p + c];
      if (is_missing(v)) continue;
      const auto& f = schema_[c];
      if (f.is_binary()) {
        if (v != 0.0 && v != 1.0) {
          throw std::invalid_argument("cohort: binary feature " + f.name + " has value " +
                                      format_double(v));
        }
      } else if (!std::isfinite(v) || v < f.min || v > f.max) {
        throw std::invalid_argument("cohort: feature " + f.name + " value " + format_double(v) +
                                    " outside schema range");
      }
    }
  }
}

std::size_t CohortTable::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return is_missing(v); }));
}

double CohortTable::prevalence() const {
  if (outcomes_.empty()) return 0.0;
  const auto pos = std::accumulate(outcomes_.begin(), outcomes_.end(), std::size_t{0});
  return static_cast<double>(pos) / static_cast<double>(outcomes_.size());
}

CohortTable CohortTable::subset(std::span<const std::size_t> rows) const {
  const std::size_t p = num_features();
  std::vector<double> vals;
  vals.reserve(rows.size() * p);
  std::vector<std::uint8_t> outs;
  outs.reserve(rows.size());
  for (auto r : rows) {
    if (r >= num_rows()) throw std::out_of_range("cohort subset: row out of range");
    auto src = row(r);
    vals.insert(vals.end(), src.begin(), src.end());
    outs.push_back(outcomes_[r]);
  }
  return CohortTable(schema_, std::move(vals), std::move(outs));
}

Matrix CohortTable::feature_matrix(std::span<const std::size_t> rows) const {
  const std::size_t p = num_features();
  const std::size_t n = rows.empty() ? num_rows() : rows.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rows.empty() ? i : rows[i];
    for (std::size_t c = 0; c < p; ++c) {
      const double v = value(r, c);
      if (is_missing(v)) throw DataError("feature matrix requested over a missing cell");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

bool CohortTable::operator==(const CohortTable& other) const {
  if (!(schema_ == other.schema_) || outcomes_ != other.outcomes_) return false;
  if (values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double a = values_[i];
    const double b = other.values_[i];
    if (is_missing(a) != is_missing(b)) return false;
    if (!is_missing(a) && a != b) return false;
  }
  return true;
}

// ---------------------------------------------------------------- signal

SignalSpec SignalSpec::default_nonlinear() {
  SignalSpec s;
  s.link = Link::Logistic;
  s.linear = {{"age", 0.30},          {"ejection_fraction", -0.25}, {"creatinine", 0.15},
              {"nyha_class", 0.20},   {"beta_blocker", -0.20},      {"systolic_bp", -0.10},
              {"sodium", -0.10}};
  s.interactions = {{"heart_rate", "potassium", 1.1}, {"bmi", "hemoglobin", -0.9},
                    {"age", "diastolic_bp", 0.6}};
  s.thresholds = {{"bmi", -1.3, false, 1.2},
                  {"potassium", 1.5, true, 1.0},
                  {"potassium", -1.5, false, 1.0},
                  {"sodium", -1.5, false, 1.0},
                  {"heart_rate", 1.6, true, 0.8}};
  return s;
}

double generator_center(std::size_t feature) { return kGen.at(feature).center; }
double generator_scale(std::size_t feature) { return kGen.at(feature).scale; }

PlantedSignal::PlantedSignal(const FeatureSchema& schema, SignalSpec spec) : spec_(std::move(spec)) {
  center_.resize(schema.size());
  scale_.resize(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].is_binary()) {
      center_[i] = 0.0;
      scale_[i] = 1.0;
    } else if (i < kGen.size()) {
      center_[i] = kGen[i].center;
      scale_[i] = kGen[i].scale;
    }
  }
  for (const auto& t : spec_.linear) linear_.push_back({schema.index_of(t.feature), 0, t.weight});
  for (const auto& t : spec_.interactions) {
    interactions_.push_back({schema.index_of(t.a), schema.index_of(t.b), t.weight});
  }
  for (const auto& t : spec_.thresholds) {
    thresholds_.push_back({schema.index_of(t.feature), 0, t.weight, t.threshold, t.above});
  }
}

double PlantedSignal::standardize(std::size_t feature, double raw) const {
  return (raw - center_[feature]) / scale_[feature];
}

double PlantedSignal::score(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : linear_) s += t.weight * standardize(t.a, x[t.a]);
  for (const auto& t : interactions_) {
    s += t.weight * standardize(t.a, x[t.a]) * standardize(t.b, x[t.b]);
  }
  for (const auto& t : thresholds_) {
    const double z = standardize(t.a, x[t.a]);
    if (t.above ? z > t.threshold : z < t.threshold) s += t.weight;
  }
  return s;
}

double PlantedSignal::risk(std::span<const double> x, double intercept) const {
  const double eta = intercept + score(x);
  if (spec_.link == Link::Logistic) return sigmoid(eta);
  return std::clamp(eta, 0.0, 1.0);
}

std::vector<double> PlantedSignal::raw_linear_weights() const {
  std::vector<double> w(center_.size(), 0.0);
  for (const auto& t : linear_) w[t.a] += t.weight / scale_[t.a];
  return w;
}

// ---------------------------------------------------------------- generator

SyntheticCohort generate_synthetic(const GeneratorConfig& config) {
  if (config.n_patients < 1) throw std::invalid_argument("n_patients must be at least 1");
  if (!(config.target_prevalence > 0.0 && config.target_prevalence < 1.0)) {
    throw std::invalid_argument("target_prevalence must lie strictly inside (0, 1)");
  }
  FeatureSchema schema = FeatureSchema::heart_failure();
  const std::size_t n = config.n_patients;
  const std::size_t p = schema.size();

  const boost::math::normal_distribution<double> std_normal;
  std::array<double, kNumFeatures> binary_cut{};
  for (std::size_t c = 0; c < p; ++c) {
    if (schema[c].is_binary()) binary_cut[c] = boost::math::quantile(std_normal, 1.0 - kGen[c].prevalence);
  }

  Rng rng(derive_seed(config.seed, {hash_string("features")}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(n * p);
  for (std::size_t r = 0; r < n; ++r) {
    const std::array<double, 3> factor = {normal(rng), normal(rng), normal(rng)};
    for (std::size_t c = 0; c < p; ++c) {
      const auto& g = kGen[c];
      double shared = 0.0;
      double load2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        shared += g.loadings[k] * factor[k];
        load2 += g.loadings[k] * g.loadings[k];
      }
      const double z = shared + std::sqrt(1.0 - load2) * normal(rng);
      values[r * p + c] = schema[c].is_binary() ? (z > binary_cut[c] ? 1.0 : 0.0)
                                                : schema[c].clamp(g.center + g.scale * z);
    }
  }

  PlantedSignal signal(schema, config.signal);
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r) {
    scores[r] = signal.score(std::span<const double>(values.data() + r * p, p));
  }
  auto mean_risk = [&](double b) {
    double s = 0.0;
    for (double sc : scores) {
      const double eta = b + sc;
      s += config.signal.link == Link::Logistic ? sigmoid(eta) : std::clamp(eta, 0.0, 1.0);
    }
    return s / static_cast<double>(n);
  };
  double lo = -30.0;
  double hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_risk(mid) < config.target_prevalence ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);

  Rng outcome_rng(derive_seed(config.seed, {hash_string("outcomes")}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> risk(n);
  std::vector<std::uint8_t> outcomes(n);
  for (std::size_t r = 0; r < n; ++r) {
    risk[r] = signal.risk(std::span<const double>(values.data() + r * p, p), intercept);
    outcomes[r] = unif(outcome_rng) < risk[r] ? 1 : 0;
  }
  return {CohortTable(std::move(schema), std::move(values), std::move(outcomes)), std::move(risk),
          intercept};
}

CohortTable generate_cohort(const GeneratorConfig& config) {
  return generate_synthetic(config).table;
}

// ---------------------------------------------------------------- missingness

CohortTable inject_missingness(const CohortTable& cohort, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("missingness rate must lie in [0, 1)");
  if (rate == 0.0) return cohort;
  std::vector<double> values = cohort.values();
  Rng rng(derive_seed(seed, {hash_string("mcar")}));
  std::bernoulli_distribution mask(rate);
  for (double& v : values) {
    if (mask(rng)) v = kMissing;
  }
  return CohortTable(cohort.schema(), std::move(values), cohort.outcomes());
}

// ---------------------------------------------------------------- imputation

namespace {

struct ColumnFill {
  std::vector<std::size_t> missing_rows;
  std::vector<std::size_t> observed_rows;
  double initial = 0.0;
};

std::vector<ColumnFill> column_fills(const CohortTable& cohort) {
  const std::size_t n = cohort.num_rows();
  const std::size_t p = cohort.num_features();
  std::vector<ColumnFill> fills(p);
  for (std::size_t c = 0; c < p; ++c) {
    auto& f = fills[c];
    double sum = 0.0;
    std::size_t ones = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = cohort.value(r, c);
      if (is_missing(v)) {
        f.missing_rows.push_back(r);
      } else {
        f.observed_rows.push_back(r);
        sum += v;
        if (v == 1.0) ++ones;
      }
    }
    if (f.observed_rows.empty() && n > 0) {
      throw DataError("cannot impute feature '" + cohort.schema()[c].name +
                      "': every value is missing");
    }
    if (f.observed_rows.empty()) continue;
    const auto obs = static_cast<double>(f.observed_rows.size());
    f.initial = cohort.schema()[c].is_binary() ? (2 * ones >= f.observed_rows.size() ? 1.0 : 0.0)
                                               : sum / obs;
  }
  return fills;
}

}  // namespace

CohortTable impute_mean(const CohortTable& cohort) {
  const auto fills = column_fills(cohort);
  std::vector<double> values = cohort.values();
  const std::size_t p = cohort.num_features();
  for (std::size_t c = 0; c < p; ++c) {
    for (auto r : fills[c].missing_rows) values[r * p + c] = fills[c].initial;
  }
  return CohortTable(cohort.schema(), std::move(values), cohort.outcomes());
}

CohortTable impute_mice(const CohortTable& cohort, int cycles) {
  if (cycles < 1) throw std::invalid_argument("MICE needs at least one cycle");
  const auto fills = column_fills(cohort);
  const std::size_t n = cohort.num_rows();
  const std::size_t p = cohort.num_features();
  const auto& schema = cohort.schema();

  Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  bool any_missing = false;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      const double v = cohort.value(r, c);
      data(r, c) = is_missing(v) ? fills[c].initial : v;
      any_missing = any_missing || is_missing(v);
    }
  }
  if (!any_missing) return cohort;

  const auto pi = static_cast<Eigen::Index>(p);
  for (int cycle = 0; cycle < cycles; ++cycle) {
    for (std::size_t c = 0; c < p; ++c) {
      const auto& f = fills[c];
      if (f.missing_rows.empty()) continue;
      const auto ci = static_cast<Eigen::Index>(c);

      auto predictors = [&](std::size_t r, Eigen::Index out_row, Matrix& x) {
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < pi; ++j) {
          if (j != ci) x(out_row, k++) = data(static_cast<Eigen::Index>(r), j);
        }
      };
      Matrix x(static_cast<Eigen::Index>(f.observed_rows.size()), pi - 1);
      Vector y(static_cast<Eigen::Index>(f.observed_rows.size()));
      for (std::size_t i = 0; i < f.observed_rows.size(); ++i) {
        predictors(f.observed_rows[i], static_cast<Eigen::Index>(i), x);
        y(static_cast<Eigen::Index>(i)) = data(static_cast<Eigen::Index>(f.observed_rows[i]), ci);
      }
      const OlsFit fit = fit_ols(x, y);

      Matrix xm(1, pi - 1);
      for (auto r : f.missing_rows) {
        predictors(r, 0, xm);
        const double fitted = fit.coefficients(0) + (xm.row(0) * fit.coefficients.tail(pi - 1))(0);
        data(static_cast<Eigen::Index>(r), ci) = schema[c].clamp(fitted);
      }
    }
  }

  std::vector<double> values(n * p);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) values[r * p + c] = data(r, c);
  }
  return CohortTable(schema, std::move(values), cohort.outcomes());
}

// ---------------------------------------------------------------- csv

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_cohort_csv(std::ostream& out, const CohortTable& cohort) {
  const auto& schema = cohort.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) out << schema[c].name << ',';
  out << "death_1yr\n";
  for (std::size_t r = 0; r < cohort.num_rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const double v = cohort.value(r, c);
      if (!is_missing(v)) out << format_double(v);
      out << ',';
    }
    out << static_cast<int>(cohort.outcome(r)) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

CohortTable read_cohort_csv(std::istream& in, const FeatureSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("cohort csv: missing header");
  const auto header = split_csv_line(line);
  if (header.size() != schema.size() + 1 || header.back() != "death_1yr") {
    throw DataError("cohort csv: header must list the schema features followed by death_1yr");
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (header[c] != schema[c].name) {
      throw DataError("cohort csv: column " + std::to_string(c) + " is '" + header[c] +
                      "', expected '" + schema[c].name + "'");
    }
  }
  std::vector<double> values;
  std::vector<std::uint8_t> outcomes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("cohort csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& s = fields[c];
      if (s.empty()) {
        values.push_back(kMissing);
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError("cohort csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
      }
      values.push_back(v);
    }
    const auto& o = fields.back();
    if (o != "0" && o != "1") {
      throw DataError("cohort csv line " + std::to_string(line_no) + ": death_1yr must be 0 or 1");
    }
    outcomes.push_back(o == "1" ? 1 : 0);
  }
  try {
    return CohortTable(schema, std::move(values), std::move(outcomes));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("cohort csv: ") + e.what());
  }
}

}  // namespace trustdss
