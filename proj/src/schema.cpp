#include "trustdss/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace trustdss {

std::string_view to_string(FeatureKind k) {
  return k == FeatureKind::Binary ? "binary" : "continuous";
}

std::string_view to_string(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::Demographics: return "demographics";
    case FeatureCategory::VitalsCharacteristics: return "vitals/characteristics";
    case FeatureCategory::Symptom: return "symptom";
    case FeatureCategory::Medication: return "medication";
  }
  return "?";
}

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "binary") return FeatureKind::Binary;
  if (s == "continuous") return FeatureKind::Continuous;
  throw std::invalid_argument("unknown feature kind: " + std::string(s));
}

FeatureCategory feature_category_from_string(std::string_view s) {
  if (s == "demographics") return FeatureCategory::Demographics;
  if (s == "vitals/characteristics") return FeatureCategory::VitalsCharacteristics;
  if (s == "symptom") return FeatureCategory::Symptom;
  if (s == "medication") return FeatureCategory::Medication;
  throw std::invalid_argument("unknown feature category: " + std::string(s));
}

double FeatureDescriptor::clamp(double v) const {
  if (is_binary()) return v >= 0.5 ? 1.0 : 0.0;
  return std::clamp(v, min, max);
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features)
    : features_(std::move(features)) {
  if (features_.size() != kNumFeatures) {
    throw std::invalid_argument("feature schema must have exactly " +
                                std::to_string(kNumFeatures) + " features, got " +
                                std::to_string(features_.size()));
  }
  std::set<std::string> names;
  for (auto& f : features_) {
    if (f.name.empty()) throw std::invalid_argument("feature with empty name");
    if (!names.insert(f.name).second) {
      throw std::invalid_argument("duplicate feature name: " + f.name);
    }
    if (f.is_binary()) {
      f.min = 0.0;
      f.max = 1.0;
    } else if (!std::isfinite(f.min) || !std::isfinite(f.max) || !(f.min < f.max)) {
      throw std::invalid_argument("feature " + f.name + " needs a finite range with min < max");
    }
  }
}

FeatureSchema FeatureSchema::heart_failure() {
  using K = FeatureKind;
  using C = FeatureCategory;
  auto cont = [](std::string n, C c, double lo, double hi, std::string unit) {
    return FeatureDescriptor{std::move(n), K::Continuous, c, lo, hi, std::move(unit)};
  };
  auto bin = [](std::string n, C c) {
    return FeatureDescriptor{std::move(n), K::Binary, c, 0.0, 1.0, ""};
  };
  return FeatureSchema({
      cont("age", C::Demographics, 18, 100, "years"),
      bin("male", C::Demographics),
      cont("bmi", C::VitalsCharacteristics, 14, 50, "kg/m2"),
      cont("systolic_bp", C::VitalsCharacteristics, 70, 220, "mmHg"),
      cont("diastolic_bp", C::VitalsCharacteristics, 40, 130, "mmHg"),
      cont("heart_rate", C::VitalsCharacteristics, 35, 160, "bpm"),
      cont("ejection_fraction", C::VitalsCharacteristics, 10, 75, "%"),
      cont("creatinine", C::VitalsCharacteristics, 35, 450, "umol/L"),
      cont("sodium", C::VitalsCharacteristics, 120, 155, "mmol/L"),
      cont("hemoglobin", C::VitalsCharacteristics, 6, 19, "g/dL"),
      cont("potassium", C::VitalsCharacteristics, 2.5, 6.5, "mmol/L"),
      bin("current_smoker", C::VitalsCharacteristics),
      bin("diabetes", C::VitalsCharacteristics),
      bin("copd", C::VitalsCharacteristics),
      bin("hf_duration_over_18m", C::VitalsCharacteristics),
      bin("atrial_fibrillation", C::VitalsCharacteristics),
      bin("prior_mi", C::VitalsCharacteristics),
      bin("hypertension", C::VitalsCharacteristics),
      cont("nyha_class", C::Symptom, 1, 4, "class"),
      bin("dyspnea_at_rest", C::Symptom),
      bin("orthopnea", C::Symptom),
      bin("peripheral_edema", C::Symptom),
      bin("fatigue", C::Symptom),
      bin("angina", C::Symptom),
      bin("beta_blocker", C::Medication),
      bin("ace_inhibitor_or_arb", C::Medication),
      bin("loop_diuretic", C::Medication),
      bin("aldosterone_antagonist", C::Medication),
      bin("digoxin", C::Medication),
      bin("statin", C::Medication),
      bin("anticoagulant", C::Medication),
  });
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  throw std::out_of_range("no feature named " + std::string(name));
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = features_[i];
    const auto& b = other.features_[i];
    if (a.name != b.name || a.kind != b.kind || a.category != b.category || a.min != b.min ||
        a.max != b.max || a.unit != b.unit) {
      return false;
    }
  }
  return true;
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features_) {
    feats.push_back({{"name", f.name},
                     {"kind", to_string(f.kind)},
                     {"category", to_string(f.category)},
                     {"min", f.min},
                     {"max", f.max},
                     {"unit", f.unit}});
  }
  return {{"schema_version", 1}, {"features", feats}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  std::vector<FeatureDescriptor> out;
  for (const auto& f : j.at("features")) {
    FeatureDescriptor d;
    d.name = f.at("name").get<std::string>();
    d.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    d.category = feature_category_from_string(f.at("category").get<std::string>());
    d.min = f.at("min").get<double>();
    d.max = f.at("max").get<double>();
    d.unit = f.value("unit", "");
    out.push_back(std::move(d));
  }
  return FeatureSchema(std::move(out));
}

}  // namespace trustdss
