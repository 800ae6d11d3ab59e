#pragma once

#include <array>
#include <string_view>

namespace trustdss {

enum class EvidenceKind {
  Data,
  Methodology,
  Accuracy,
  StratifiedLinear,
  StratifiedTree,
  PatientInfo,
  Sensitivity,
  LocalLinear,
  LocalTree,
  Outcome,
};

inline constexpr std::array<EvidenceKind, 10> kAllEvidenceKinds = {
    EvidenceKind::Data,        EvidenceKind::Methodology, EvidenceKind::Accuracy,  EvidenceKind::StratifiedLinear,
    EvidenceKind::StratifiedTree, EvidenceKind::PatientInfo, EvidenceKind::Sensitivity, EvidenceKind::LocalLinear,
    EvidenceKind::LocalTree,   EvidenceKind::Outcome};

std::string_view to_string(EvidenceKind kind);
// Throws std::invalid_argument for unknown names.
EvidenceKind evidence_kind_from_string(std::string_view name);
std::string_view display_title(EvidenceKind kind);
// Per-patient kinds carry one payload per scenario.
bool is_patient_specific(EvidenceKind kind);

}  // namespace trustdss
