#include "trustdss/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "trustdss/random.hpp"

namespace trustdss {

namespace {

constexpr std::array<const char*, 12> kFirstNames = {"Margaret", "Thomas", "Evelyn", "Harold", "Ruth",   "Walter",
                                                     "Dorothy",  "Arthur", "Helen",  "Frank",  "Irene",  "George"};
constexpr std::array<const char*, 12> kLastNames = {"Hale",   "Whitford", "Marsh",  "Okafor", "Lindqvist", "Brennan",
                                                    "Castell", "Moreau",  "Dimitrov", "Asante", "Kowalski", "Reyes"};

}  // namespace

nlohmann::json SensitivityTable::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : f.entries) {
      entries.push_back({{"value", e.value}, {"risk", e.risk}, {"is_current", e.is_current}});
    }
    feats.push_back({{"feature", f.name}, {"current_value", f.current_value}, {"entries", entries}});
  }
  return {{"baseline_risk", baseline_risk}, {"features", feats}};
}

SensitivityTable build_sensitivity(const RiskScorer& model, const FeatureSchema& schema,
                                   std::span<const double> patient, std::uint64_t seed) {
  if (patient.size() != schema.size()) throw std::invalid_argument("sensitivity: patient has the wrong feature count");
  for (std::size_t c = 0; c < patient.size(); ++c) {
    if (!std::isfinite(patient[c])) throw std::invalid_argument("sensitivity: patient has a missing value");
  }
  Rng rng(derive_seed(seed, {hash_string("sensitivity")}));
  std::uniform_int_distribution<std::size_t> pick(0, schema.size() - 1);
  const std::size_t first = pick(rng);
  std::size_t second = first;
  while (second == first) second = pick(rng);

  std::vector<double> x(patient.begin(), patient.end());
  SensitivityTable table;
  table.baseline_risk = model.risk(x);

  const std::array<std::size_t, 2> chosen = {first, second};
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t j = chosen[k];
    const auto& desc = schema[j];
    auto& sf = table.features[k];
    sf.feature = j;
    sf.name = desc.name;
    sf.current_value = patient[j];

    std::vector<double> grid;
    if (desc.is_binary()) {
      grid = {0.0, 1.0};
    } else {
      for (std::size_t g = 0; g < kSensitivityGridPoints; ++g) {
        grid.push_back(desc.min + (desc.max - desc.min) * static_cast<double>(g) /
                                      static_cast<double>(kSensitivityGridPoints - 1));
      }
      std::size_t nearest = 0;
      for (std::size_t g = 1; g < grid.size(); ++g) {
        if (std::abs(grid[g] - patient[j]) < std::abs(grid[nearest] - patient[j])) nearest = g;
      }
      grid[nearest] = patient[j];
      std::sort(grid.begin(), grid.end());
    }
    for (double v : grid) {
      x[j] = v;
      sf.entries.push_back({v, model.risk(x), v == patient[j]});
    }
    x[j] = patient[j];
  }
  return table;
}

std::vector<PatientScenario> select_patient_scenarios(const RiskScorer& model, const CohortTable& cohort,
                                                      std::span<const std::size_t> test_rows, std::uint64_t seed) {
  if (test_rows.size() < kScenarioCount) {
    throw std::invalid_argument("need at least " + std::to_string(kScenarioCount) + " test patients, got " +
                                std::to_string(test_rows.size()));
  }
  std::vector<std::size_t> ids(test_rows.begin(), test_rows.end());
  std::sort(ids.begin(), ids.end());
  std::vector<double> risk(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) risk[i] = model.risk(cohort.row(ids[i]));

  Rng rng(derive_seed(seed, {hash_string("scenario-names")}));
  std::vector<std::size_t> name_order(kFirstNames.size());
  std::iota(name_order.begin(), name_order.end(), std::size_t{0});
  std::shuffle(name_order.begin(), name_order.end(), rng);

  std::vector<bool> taken(ids.size(), false);
  std::vector<PatientScenario> out;
  for (std::size_t t = 0; t < kScenarioCount; ++t) {
    std::size_t best = ids.size();
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (taken[i]) continue;
      const double gap = std::abs(risk[i] - kScenarioRiskTargets[t]);
      if (gap < best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    taken[best] = true;
    PatientScenario s;
    s.patient_id = ids[best];
    auto row = cohort.row(ids[best]);
    s.features.assign(row.begin(), row.end());
    s.predicted_risk = risk[best];
    s.outcome = cohort.outcome(ids[best]);
    const std::size_t name_idx = name_order[t];
    s.display_name = std::string(kFirstNames[name_idx]) + " " + kLastNames[(name_idx * 5 + t) % kLastNames.size()];
    s.portrait = "portrait_" + std::to_string(name_idx + 1);
    s.sensitivity = build_sensitivity(model, cohort.schema(), s.features,
                                      derive_seed(seed, {static_cast<std::uint64_t>(s.patient_id)}));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trustdss
