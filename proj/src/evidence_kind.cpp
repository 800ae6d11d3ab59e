#include "trustdss/evidence_kind.hpp"

#include <stdexcept>
#include <string>

namespace trustdss {

std::string_view to_string(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::Data: return "Data";
    case EvidenceKind::Methodology: return "Methodology";
    case EvidenceKind::Accuracy: return "Accuracy";
    case EvidenceKind::StratifiedLinear: return "StratifiedLinear";
    case EvidenceKind::StratifiedTree: return "StratifiedTree";
    case EvidenceKind::PatientInfo: return "PatientInfo";
    case EvidenceKind::Sensitivity: return "Sensitivity";
    case EvidenceKind::LocalLinear: return "LocalLinear";
    case EvidenceKind::LocalTree: return "LocalTree";
    case EvidenceKind::Outcome: return "Outcome";
  }
  return "?";
}

EvidenceKind evidence_kind_from_string(std::string_view name) {
  for (auto k : kAllEvidenceKinds) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown evidence kind: " + std::string(name));
}

std::string_view display_title(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::Data: return "Data";
    case EvidenceKind::Methodology: return "Model Training and Implementation";
    case EvidenceKind::Accuracy: return "Model Accuracy";
    case EvidenceKind::StratifiedLinear: return "Linear Approximation Coefficients";
    case EvidenceKind::StratifiedTree: return "Decision-Tree Approximations";
    case EvidenceKind::PatientInfo: return "Patient Information";
    case EvidenceKind::Sensitivity: return "Feature Sensitivity (Interactive)";
    case EvidenceKind::LocalLinear: return "Local Linear Model Coefficients";
    case EvidenceKind::LocalTree: return "Local Decision-Tree Diagram";
    case EvidenceKind::Outcome: return "Patient Outcome";
  }
  return "?";
}

bool is_patient_specific(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::PatientInfo:
    case EvidenceKind::Sensitivity:
    case EvidenceKind::LocalLinear:
    case EvidenceKind::LocalTree:
    case EvidenceKind::Outcome:
      return true;
    default:
      return false;
  }
}

}  // namespace trustdss
