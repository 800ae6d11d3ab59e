#include "trustdss/pipeline.hpp"

#include <fstream>
#include <stdexcept>

#include "trustdss/random.hpp"
#include "trustdss/scenarios.hpp"
#include "trustdss/surrogate.hpp"

namespace trustdss {

namespace {

constexpr std::uint64_t kMaskTag = 0x3a5c;
constexpr std::uint64_t kTrainTag = 0x7a1;
constexpr std::uint64_t kScenarioTag = 0x5ce;

template <typename F>
auto stage(std::string_view name, const ProgressFn& progress, F&& f) {
  if (progress) progress(name);
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(name), e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

void PipelineConfig::validate() const {
  if (n_patients < 100) throw std::invalid_argument("n_patients must be at least 100");
  if (!(target_prevalence > 0.0 && target_prevalence < 1.0)) {
    throw std::invalid_argument("target_prevalence must lie in (0, 1)");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw std::invalid_argument("missing_rate must lie in [0, 1)");
  if (mice_cycles < 1) throw std::invalid_argument("mice_cycles must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 0.5)) throw std::invalid_argument("test_fraction must lie in (0, 0.5)");
  training.validate();
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"schema_version", 1},
          {"seed", seed},
          {"cohort",
           {{"n_patients", n_patients},
            {"target_prevalence", target_prevalence},
            {"missing_rate", missing_rate},
            {"mice_cycles", mice_cycles}}},
          {"training", training.to_json()},
          {"test_fraction", test_fraction}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("cohort")) {
    const auto& k = j.at("cohort");
    c.n_patients = k.value("n_patients", c.n_patients);
    c.target_prevalence = k.value("target_prevalence", c.target_prevalence);
    c.missing_rate = k.value("missing_rate", c.missing_rate);
    c.mice_cycles = k.value("mice_cycles", c.mice_cycles);
  }
  if (j.contains("training")) {
    auto merged = c.training.to_json();
    merged.update(j.at("training"));
    c.training = TrainConfig::from_json(merged);
  }
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.validate();
  return c;
}

BuildResult run_build(const PipelineConfig& config, const std::filesystem::path& out_dir, const ProgressFn& progress) {
  stage("config", progress, [&] {
    config.validate();
    return 0;
  });

  GeneratorConfig gen;
  gen.n_patients = config.n_patients;
  gen.seed = config.seed;
  gen.target_prevalence = config.target_prevalence;
  const CohortTable complete = stage("generate", progress, [&] { return generate_cohort(gen); });

  const CohortTable masked = stage("missingness", progress, [&] {
    return inject_missingness(complete, config.missing_rate, derive_seed(config.seed, {kMaskTag}));
  });
  const double missing_share =
      static_cast<double>(masked.missing_count()) / static_cast<double>(masked.num_rows() * kNumFeatures);
  const CohortTable cohort = stage("impute", progress, [&] { return impute_mice(masked, config.mice_cycles); });

  TrainConfig train_config = config.training;
  train_config.seed = derive_seed(config.seed, {kTrainTag, config.training.seed});

  const auto cv = stage("cross_validate", progress, [&] { return cross_validate(cohort, train_config, config.test_fraction); });
  const RiskModel model = stage("train", progress, [&] { return train(cohort.subset(cv.train_rows), train_config); });
  const CohortTable train_cohort = cohort.subset(cv.train_rows);
  const auto strata = stage("surrogates", progress, [&] { return fit_strata(model, train_cohort); });
  const auto scenarios = stage("scenarios", progress, [&] {
    return select_patient_scenarios(model, cohort, cv.test_rows, derive_seed(config.seed, {kScenarioTag}));
  });

  CatalogInputs inputs;
  inputs.cohort = &cohort;
  inputs.missing_rate = missing_share;
  inputs.mice_cycles = config.mice_cycles;
  inputs.evaluation = &cv.report;
  inputs.train_config = &train_config;
  inputs.test_fraction = config.test_fraction;
  inputs.strata = &strata;
  inputs.scenarios = &scenarios;
  auto catalog = stage("evidence", progress, [&] { return assemble_catalog(inputs); });

  stage("write", progress, [&] {
    std::filesystem::create_directories(out_dir);
    write_bundle(out_dir, catalog);
    write_text(out_dir / "model.json", model.to_json().dump(1) + "\n");
    write_text(out_dir / "schema.json", cohort.schema().to_json().dump(2) + "\n");
    write_text(out_dir / "eval_report.json", cv.report.to_json().dump(2) + "\n");
    write_text(out_dir / "build_config.json", config.to_json().dump(2) + "\n");
    std::ofstream csv(out_dir / "eval_report.csv", std::ios::binary | std::ios::trunc);
    cv.report.write_csv(csv);
    if (!csv) throw std::runtime_error("cannot write eval_report.csv");
    return 0;
  });
  return {std::move(catalog), cv.report, model};
}

}  // namespace trustdss
