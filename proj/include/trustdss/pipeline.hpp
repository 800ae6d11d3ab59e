#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/error.hpp"
#include "trustdss/evidence.hpp"
#include "trustdss/risk_model.hpp"
#include "trustdss/validation.hpp"

namespace trustdss {

// Root configuration shared by every subcommand. Unknown sections are
// ignored, missing keys keep their defaults.
struct PipelineConfig {
  std::uint64_t seed = 7;
  std::size_t n_patients = 30389;
  double target_prevalence = 0.188;
  double missing_rate = 0.1;
  int mice_cycles = kDefaultMiceCycles;
  TrainConfig training;
  double test_fraction = kDefaultTestFraction;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

// A stage of the build failed; the message names the stage.
class StageError : public DataError {
 public:
  StageError(std::string stage, const std::string& what)
      : DataError("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct BuildResult {
  EvidenceCatalog catalog;
  EvalReport evaluation;
  RiskModel model;
};

using ProgressFn = std::function<void(std::string_view)>;

// generate -> mask -> impute -> cross-validate -> train -> surrogates ->
// scenarios -> evidence. Writes the bundle (manifest.json and one file per
// evidence kind) plus model.json, eval_report.csv, eval_report.json and
// schema.json into `out_dir`. Output is a function of the config alone.
BuildResult run_build(const PipelineConfig& config, const std::filesystem::path& out_dir,
                      const ProgressFn& progress = {});

}  // namespace trustdss
