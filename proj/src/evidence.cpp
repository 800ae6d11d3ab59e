#include "trustdss/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "trustdss/error.hpp"

namespace trustdss {

namespace {

template <typename T>
const T& require(const T* p, EvidenceKind kind, const char* artifact) {
  if (p == nullptr) {
    throw DataError("cannot assemble " + std::string(to_string(kind)) + " evidence: missing " + artifact);
  }
  return *p;
}

nlohmann::json data_payload(const CatalogInputs& in) {
  const auto& cohort = require(in.cohort, EvidenceKind::Data, "cohort");
  const auto& schema = cohort.schema();
  nlohmann::json features = nlohmann::json::array();
  const auto n = static_cast<double>(cohort.num_rows());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = 0; r < cohort.num_rows(); ++r) {
      const double v = cohort.value(r, c);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = n > 0 ? sum / n : 0.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < cohort.num_rows(); ++r) ss += (cohort.value(r, c) - mean) * (cohort.value(r, c) - mean);
    nlohmann::json f = {{"name", schema[c].name},
                        {"kind", to_string(schema[c].kind)},
                        {"category", to_string(schema[c].category)},
                        {"unit", schema[c].unit}};
    if (schema[c].is_binary()) {
      f["prevalence"] = mean;
    } else {
      f["mean"] = mean;
      f["std"] = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      f["min"] = lo;
      f["max"] = hi;
    }
    features.push_back(std::move(f));
  }
  return {{"n_patients", cohort.num_rows()},
          {"n_features", schema.size()},
          {"death_rate_1yr", cohort.prevalence()},
          {"imputed_cell_fraction", in.missing_rate},
          {"features", features}};
}

nlohmann::json methodology_payload(const CatalogInputs& in) {
  const auto& tc = require(in.train_config, EvidenceKind::Methodology, "training configuration");
  nlohmann::json layers = nlohmann::json::array();
  for (auto s : MlpParams::kLayerSizes) layers.push_back(s);
  return {{"imputation", {{"method", "chained equations (MICE)"}, {"cycles", in.mice_cycles}}},
          {"cross_validation",
           {{"n_folds", tc.n_folds}, {"stratified", true}, {"held_out_test_fraction", in.test_fraction}}},
          {"architecture",
           {{"type", "fully connected neural network"},
            {"layer_sizes", layers},
            {"hidden_activation", "relu"},
            {"output_activation", "sigmoid"}}},
          {"training",
           {{"optimizer", "mini-batch gradient descent with momentum"},
            {"loss", "binary cross-entropy"},
            {"learning_rate", tc.learning_rate},
            {"momentum", tc.momentum},
            {"batch_size", tc.batch_size},
            {"max_epochs", tc.epochs},
            {"early_stopping_patience", tc.patience},
            {"early_stopping_metric", "validation AUC-ROC"}}}};
}

nlohmann::json accuracy_payload(const CatalogInputs& in) {
  const auto& ev = require(in.evaluation, EvidenceKind::Accuracy, "evaluation report");
  auto j = ev.to_json();
  return {{"n_folds", ev.folds.size()},
          {"neural_network", j.at("neural_network")},
          {"linear_regression", j.at("linear_regression")}};
}

nlohmann::json stratified_linear_payload(const CatalogInputs& in) {
  const auto& strata = require(in.strata, EvidenceKind::StratifiedLinear, "stratum models");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : strata) arr.push_back(s.linear.to_json());
  return {{"strata", arr}, {"significance_level", kSignificanceLevel}};
}

nlohmann::json stratified_tree_payload(const CatalogInputs& in) {
  const auto& strata = require(in.strata, EvidenceKind::StratifiedTree, "stratum models");
  const auto& cohort = require(in.cohort, EvidenceKind::StratifiedTree, "cohort");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : strata) arr.push_back(s.tree.to_json(cohort.schema()));
  return {{"strata", arr}, {"max_depth", TreeOptions{}.max_depth}};
}

nlohmann::json per_patient(const CatalogInputs& in, EvidenceKind kind) {
  const auto& scenarios = require(in.scenarios, kind, "patient scenarios");
  const auto& cohort = require(in.cohort, kind, "cohort");
  const std::array<StratumModel, kNumStrata>* strata = nullptr;
  if (kind == EvidenceKind::LocalLinear || kind == EvidenceKind::LocalTree) {
    strata = &require(in.strata, kind, "stratum models");
  }
  nlohmann::json patients = nlohmann::json::array();
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& s = scenarios[i];
    nlohmann::json p = {{"patient_index", i}};
    switch (kind) {
      case EvidenceKind::PatientInfo: {
        nlohmann::json feats = nlohmann::json::object();
        for (std::size_t c = 0; c < s.features.size(); ++c) feats[cohort.schema()[c].name] = s.features[c];
        p["patient_id"] = s.patient_id;
        p["display_name"] = s.display_name;
        p["portrait"] = s.portrait;
        p["features"] = feats;
        p["predicted_risk"] = s.predicted_risk;
        break;
      }
      case EvidenceKind::Sensitivity:
        p["table"] = s.sensitivity.to_json();
        break;
      case EvidenceKind::LocalLinear: {
        const int k = stratum_of(s.predicted_risk);
        p["stratum"] = k;
        p["model"] = (*strata)[static_cast<std::size_t>(k)].linear.to_json();
        break;
      }
      case EvidenceKind::LocalTree: {
        const int k = stratum_of(s.predicted_risk);
        p["stratum"] = k;
        p["model"] = (*strata)[static_cast<std::size_t>(k)].tree.to_json(cohort.schema());
        break;
      }
      case EvidenceKind::Outcome: {
        const bool high = s.predicted_risk >= 0.5;
        p["died_within_1yr"] = s.outcome == 1;
        p["predicted_risk"] = s.predicted_risk;
        p["predicted_high_risk"] = high;
        p["prediction_accurate"] = high == (s.outcome == 1);
        break;
      }
      default:
        break;
    }
    patients.push_back(std::move(p));
  }
  return {{"patients", patients}};
}

}  // namespace

EvidenceCatalog assemble_catalog(const CatalogInputs& inputs) {
  EvidenceCatalog catalog;
  for (auto kind : kAllEvidenceKinds) {
    nlohmann::json payload;
    switch (kind) {
      case EvidenceKind::Data: payload = data_payload(inputs); break;
      case EvidenceKind::Methodology: payload = methodology_payload(inputs); break;
      case EvidenceKind::Accuracy: payload = accuracy_payload(inputs); break;
      case EvidenceKind::StratifiedLinear: payload = stratified_linear_payload(inputs); break;
      case EvidenceKind::StratifiedTree: payload = stratified_tree_payload(inputs); break;
      default: payload = per_patient(inputs, kind); break;
    }
    catalog[kind] = EvidenceItem{kind, std::string(display_title(kind)), std::move(payload)};
  }
  return catalog;
}

std::string bundle_file_name(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::Data: return "data.json";
    case EvidenceKind::Methodology: return "methodology.json";
    case EvidenceKind::Accuracy: return "accuracy.json";
    case EvidenceKind::StratifiedLinear: return "stratified_linear.json";
    case EvidenceKind::StratifiedTree: return "stratified_tree.json";
    case EvidenceKind::PatientInfo: return "patient_info.json";
    case EvidenceKind::Sensitivity: return "sensitivity.json";
    case EvidenceKind::LocalLinear: return "local_linear.json";
    case EvidenceKind::LocalTree: return "local_tree.json";
    case EvidenceKind::Outcome: return "outcome.json";
  }
  return "unknown.json";
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ServiceError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw ServiceError("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const EvidenceCatalog& catalog) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [kind, item] : catalog) {
    const auto name = bundle_file_name(kind);
    write_json(dir / name, {{"schema_version", kBundleSchemaVersion},
                            {"kind", to_string(kind)},
                            {"display_title", item.display_title},
                            {"payload", item.payload}});
    files[std::string(to_string(kind))] = name;
  }
  write_json(dir / "manifest.json", {{"schema_version", kBundleSchemaVersion},
                                     {"format", "trustdss.evidence_bundle"},
                                     {"files", files}});
}

EvidenceBundle EvidenceBundle::from_catalog(const EvidenceCatalog& catalog) {
  EvidenceBundle b;
  b.items_ = catalog;
  if (auto it = catalog.find(EvidenceKind::PatientInfo); it != catalog.end()) {
    b.patient_count_ = it->second.payload.at("patients").size();
  }
  return b;
}

EvidenceBundle EvidenceBundle::load(const std::filesystem::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  if (manifest.value("schema_version", 0) != kBundleSchemaVersion) {
    throw DataError("unsupported evidence bundle version in " + dir.string());
  }
  EvidenceCatalog catalog;
  try {
    for (const auto& [kind_name, file] : manifest.at("files").items()) {
      const auto kind = evidence_kind_from_string(kind_name);
      const auto doc = read_json(dir / file.get<std::string>());
      if (doc.at("kind").get<std::string>() != kind_name) {
        throw DataError("bundle file " + file.get<std::string>() + " does not hold " + kind_name);
      }
      catalog[kind] = EvidenceItem{kind, doc.value("display_title", std::string(display_title(kind))), doc.at("payload")};
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evidence bundle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed evidence bundle: ") + e.what());
  }
  for (auto kind : kAllEvidenceKinds) {
    if (!catalog.count(kind)) throw DataError("evidence bundle lacks " + std::string(to_string(kind)));
  }
  return from_catalog(catalog);
}

const EvidenceItem& EvidenceBundle::item(EvidenceKind kind) const {
  auto it = items_.find(kind);
  if (it == items_.end()) throw NotFoundError("bundle has no " + std::string(to_string(kind)) + " evidence");
  return it->second;
}

nlohmann::json EvidenceBundle::step_payload(EvidenceKind kind, std::optional<std::size_t> patient_index) const {
  const auto& it = item(kind);
  if (!is_patient_specific(kind)) return it.payload;
  const auto& patients = it.payload.at("patients");
  const std::size_t idx = patient_index.value_or(0);
  if (idx >= patients.size()) throw NotFoundError("no patient " + std::to_string(idx) + " in the bundle");
  return patients[idx];
}

}  // namespace trustdss
