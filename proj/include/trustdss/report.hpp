#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/bandit.hpp"
#include "trustdss/responses.hpp"

namespace trustdss {

inline constexpr double kCiZ = 1.96;

struct ArmReportRow {
  int part = 1;
  Role role = Role::Clinician;
  char arm = 'A';
  std::uint64_t pulls = 0;
  double reward_sum = 0.0;
  double mean = 0.0;
  std::optional<double> ucb_upper;  // absent while unpulled
};

// Mean of normalized ratings with a normal-approximation 95% interval,
// capped to [0, 1]. The interval is absent below two observations.
struct MeanWithCi {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> std_dev;  // sample standard deviation
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

MeanWithCi mean_with_ci(const std::vector<double>& values);

struct EvidenceReportRow {
  Role role = Role::Clinician;
  EvidenceKind kind = EvidenceKind::Data;
  MeanWithCi stats;
};

struct PatientReportRow {
  Role role = Role::Clinician;
  std::size_t patient_index = 0;
  MeanWithCi stats;
};

struct ArmReport {
  ResponseFilter filter;
  std::size_t n_sessions = 0;
  std::size_t n_ratings = 0;
  std::vector<ArmReportRow> arms;            // every catalog arm, zero pulls included
  std::vector<EvidenceReportRow> evidence;   // Part 1 usefulness
  std::vector<PatientReportRow> patients;    // Part 2 confidence

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

// Bandit pulls are recovered from the table alone: every Part 1 confidence
// rating is one pull, and every session with all Part 2 patient ratings is
// one pull crediting their normalized mean.
ArmReport build_report(const ResponseTable& table, const ResponseFilter& filter = {},
                       std::size_t patients_per_session = 4);

}  // namespace trustdss
