#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/risk_model.hpp"

namespace trustdss {

inline constexpr std::size_t kScenarioCount = 4;
inline constexpr std::array<double, kScenarioCount> kScenarioRiskTargets = {0.15, 0.40, 0.60, 0.85};
inline constexpr std::size_t kSensitivityGridPoints = 5;

struct SensitivityEntry {
  double value = 0.0;
  double risk = 0.0;
  bool is_current = false;
};

struct SensitivityFeature {
  std::size_t feature = 0;
  std::string name;
  double current_value = 0.0;
  std::vector<SensitivityEntry> entries;  // ascending by value
};

// Two features of one patient, each with precomputed what-if risks.
struct SensitivityTable {
  double baseline_risk = 0.0;
  std::array<SensitivityFeature, 2> features;

  nlohmann::json to_json() const;
};

// Picks two distinct features from (seed), then evaluates the model on a
// 5-point grid across each continuous feature's range (the grid point
// nearest the current value is replaced by it) or on {0, 1} for binary
// features. Other features stay at the patient's values.
SensitivityTable build_sensitivity(const RiskScorer& model, const FeatureSchema& schema,
                                   std::span<const double> patient, std::uint64_t seed);

struct PatientScenario {
  std::size_t patient_id = 0;  // row index in the source cohort
  std::vector<double> features;
  double predicted_risk = 0.0;
  std::uint8_t outcome = 0;
  std::string display_name;
  std::string portrait;
  SensitivityTable sensitivity;
};

// The test patients nearest to the 0.15/0.40/0.60/0.85 risk targets, one
// distinct patient per target (ties go to the lowest id), returned in target
// order.
std::vector<PatientScenario> select_patient_scenarios(const RiskScorer& model, const CohortTable& cohort,
                                                      std::span<const std::size_t> test_rows, std::uint64_t seed);

}  // namespace trustdss
