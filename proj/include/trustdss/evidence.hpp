#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/evidence_kind.hpp"
#include "trustdss/risk_model.hpp"
#include "trustdss/scenarios.hpp"
#include "trustdss/surrogate.hpp"
#include "trustdss/validation.hpp"

namespace trustdss {

inline constexpr int kBundleSchemaVersion = 1;

struct EvidenceItem {
  EvidenceKind kind = EvidenceKind::Data;
  std::string display_title;
  nlohmann::json payload;
};

using EvidenceCatalog = std::map<EvidenceKind, EvidenceItem>;

// Everything the catalog is assembled from. Null pointers mark artifacts that
// were not built.
struct CatalogInputs {
  const CohortTable* cohort = nullptr;  // imputed
  double missing_rate = 0.0;            // share of cells imputed
  int mice_cycles = kDefaultMiceCycles;
  const EvalReport* evaluation = nullptr;
  const TrainConfig* train_config = nullptr;
  double test_fraction = kDefaultTestFraction;
  const std::array<StratumModel, kNumStrata>* strata = nullptr;
  const std::vector<PatientScenario>* scenarios = nullptr;
};

// One item per evidence kind. Throws DataError naming the first kind whose
// upstream artifact is missing.
EvidenceCatalog assemble_catalog(const CatalogInputs& inputs);

std::string bundle_file_name(EvidenceKind kind);

// manifest.json plus one <kind>.json per catalog item.
void write_bundle(const std::filesystem::path& dir, const EvidenceCatalog& catalog);

// Read-only view of a bundle, as consumed by the survey service.
class EvidenceBundle {
 public:
  EvidenceBundle() = default;
  static EvidenceBundle load(const std::filesystem::path& dir);
  static EvidenceBundle from_catalog(const EvidenceCatalog& catalog);

  bool has(EvidenceKind kind) const { return items_.count(kind) != 0; }
  const EvidenceItem& item(EvidenceKind kind) const;
  // Whole payload for general kinds; the patient's entry for per-patient
  // kinds.
  nlohmann::json step_payload(EvidenceKind kind, std::optional<std::size_t> patient_index) const;
  std::size_t patient_count() const { return patient_count_; }

 private:
  std::map<EvidenceKind, EvidenceItem> items_;
  std::size_t patient_count_ = 0;
};

}  // namespace trustdss
