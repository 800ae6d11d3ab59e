#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace trustdss {

inline constexpr std::size_t kNumFeatures = 31;

enum class FeatureKind { Continuous, Binary };
enum class FeatureCategory { Demographics, VitalsCharacteristics, Symptom, Medication };

std::string_view to_string(FeatureKind k);
std::string_view to_string(FeatureCategory c);
FeatureKind feature_kind_from_string(std::string_view s);
FeatureCategory feature_category_from_string(std::string_view s);

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  FeatureCategory category = FeatureCategory::VitalsCharacteristics;
  double min = 0.0;  // for binary features always 0
  double max = 1.0;  // for binary features always 1
  std::string unit;

  bool is_binary() const { return kind == FeatureKind::Binary; }
  double clamp(double v) const;
};

class FeatureSchema {
 public:
  // Throws std::invalid_argument unless there are exactly kNumFeatures
  // uniquely named features and every continuous range has finite min < max.
  explicit FeatureSchema(std::vector<FeatureDescriptor> features);

  // Heart-failure flavoured default: demographics, vitals, symptoms and
  // medications.
  static FeatureSchema heart_failure();

  std::size_t size() const { return features_.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<FeatureDescriptor>& features() const { return features_; }

  // Index of a feature by name; throws std::out_of_range if absent.
  std::size_t index_of(std::string_view name) const;

  bool operator==(const FeatureSchema& other) const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

 private:
  std::vector<FeatureDescriptor> features_;
};

}  // namespace trustdss
