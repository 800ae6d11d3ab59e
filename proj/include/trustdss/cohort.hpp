#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trustdss/linalg.hpp"
#include "trustdss/schema.hpp"

namespace trustdss {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Patients x features, row-major, with a binary 1-year mortality label per
// patient. Missing cells hold kMissing.
class CohortTable {
 public:
  CohortTable(FeatureSchema schema, std::vector<double> values, std::vector<std::uint8_t> outcomes);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t num_rows() const { return outcomes_.size(); }
  std::size_t num_features() const { return schema_.size(); }

  double value(std::size_t r, std::size_t c) const { return values_[r * num_features() + c]; }
  bool missing(std::size_t r, std::size_t c) const { return is_missing(value(r, c)); }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * num_features(), num_features()};
  }
  std::uint8_t outcome(std::size_t r) const { return outcomes_[r]; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& outcomes() const { return outcomes_; }

  std::size_t missing_count() const;
  double prevalence() const;

  CohortTable subset(std::span<const std::size_t> rows) const;

  // Dense matrix of the selected rows (all rows when `rows` is empty).
  // Requires no missing cells in those rows.
  Matrix feature_matrix(std::span<const std::size_t> rows = {}) const;

  bool operator==(const CohortTable& other) const;

 private:
  FeatureSchema schema_;
  std::vector<double> values_;
  std::vector<std::uint8_t> outcomes_;
};

enum class Link { Logistic, Identity };

// Terms act on standardized features: (x - center) / scale for continuous
// features and the raw 0/1 value for binary ones. Threshold values are in
// the same standardized units.
struct LinearTerm {
  std::string feature;
  double weight = 0.0;
};
struct InteractionTerm {
  std::string a;
  std::string b;
  double weight = 0.0;
};
struct ThresholdTerm {
  std::string feature;
  double threshold = 0.0;
  bool above = true;
  double weight = 0.0;
};

struct SignalSpec {
  Link link = Link::Logistic;
  std::vector<LinearTerm> linear;
  std::vector<InteractionTerm> interactions;
  std::vector<ThresholdTerm> thresholds;

  // Mostly nonlinear risk: a weak linear part plus interactions and
  // threshold effects that a linear score cannot express.
  static SignalSpec default_nonlinear();
};

struct GeneratorConfig {
  std::size_t n_patients = 30389;
  std::uint64_t seed = 7;
  double target_prevalence = 0.188;
  SignalSpec signal = SignalSpec::default_nonlinear();
};

// The planted risk function, evaluable on any feature vector.
class PlantedSignal {
 public:
  PlantedSignal(const FeatureSchema& schema, SignalSpec spec);

  // Linear predictor without the intercept.
  double score(std::span<const double> x) const;
  double risk(std::span<const double> x, double intercept) const;

  // Coefficients of the linear terms expressed on raw feature units.
  std::vector<double> raw_linear_weights() const;
  double standardize(std::size_t feature, double raw) const;

  const SignalSpec& spec() const { return spec_; }

 private:
  struct Resolved {
    std::size_t a = 0;
    std::size_t b = 0;
    double weight = 0.0;
    double threshold = 0.0;
    bool above = true;
  };
  SignalSpec spec_;
  std::vector<double> center_;
  std::vector<double> scale_;
  std::vector<Resolved> linear_;
  std::vector<Resolved> interactions_;
  std::vector<Resolved> thresholds_;
};

struct SyntheticCohort {
  CohortTable table;
  std::vector<double> true_risk;  // planted probability per row
  double intercept = 0.0;         // calibrated to hit the target prevalence
};

SyntheticCohort generate_synthetic(const GeneratorConfig& config);
CohortTable generate_cohort(const GeneratorConfig& config);

// Population center and scale that the generator uses for each feature.
double generator_center(std::size_t feature);
double generator_scale(std::size_t feature);

// Missing-completely-at-random masking of feature cells; labels untouched.
CohortTable inject_missingness(const CohortTable& cohort, double rate, std::uint64_t seed);

inline constexpr int kDefaultMiceCycles = 10;

// Single chained-equations imputation. Missing cells start at the column
// mean (continuous) or mode (binary); each cycle regresses every incomplete
// feature on all the others over the rows where it was observed and
// overwrites its missing cells with clamped fitted values.
CohortTable impute_mice(const CohortTable& cohort, int cycles = kDefaultMiceCycles);

// Mean/mode fill; the baseline the chained equations are compared with.
CohortTable impute_mean(const CohortTable& cohort);

// Header row of feature names plus `death_1yr`; empty fields are missing.
void write_cohort_csv(std::ostream& out, const CohortTable& cohort);
CohortTable read_cohort_csv(std::istream& in, const FeatureSchema& schema);

std::string format_double(double v);

}  // namespace trustdss
