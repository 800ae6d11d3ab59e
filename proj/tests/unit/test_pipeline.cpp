#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "trustdss/error.hpp"
#include "trustdss/evidence.hpp"
#include "trustdss/pipeline.hpp"

using namespace trustdss;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> file_names(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("a small build is complete and byte-identical when rerun") {
  fixture::TempDir a("build_a");
  fixture::TempDir b("build_b");
  const auto cfg = fixture::small_pipeline_config();
  std::vector<std::string> stages;
  const auto result = run_build(cfg, a.path(), [&](std::string_view s) { stages.emplace_back(s); });
  run_build(cfg, b.path());

  CHECK(result.catalog.size() == kAllEvidenceKinds.size());
  CHECK(std::find(stages.begin(), stages.end(), "impute") != stages.end());
  CHECK(std::find(stages.begin(), stages.end(), "write") != stages.end());

  const auto names = file_names(a.path());
  CHECK(names == file_names(b.path()));
  for (const auto& n : names) CHECK_MESSAGE(slurp(a.path() / n) == slurp(b.path() / n), n);
  for (auto k : kAllEvidenceKinds) CHECK(std::filesystem::exists(a.path() / bundle_file_name(k)));
  for (const char* f : {"manifest.json", "model.json", "schema.json", "eval_report.json", "eval_report.csv"}) {
    CHECK(std::filesystem::exists(a.path() / f));
  }

  const auto bundle = EvidenceBundle::load(a.path());
  CHECK(bundle.patient_count() == 4);
  for (const auto& [kind, item] : result.catalog) {
    REQUIRE(bundle.has(kind));
    CHECK(bundle.item(kind).payload == item.payload);
    CHECK(bundle.item(kind).display_title == item.display_title);
  }
  const auto tree = bundle.step_payload(EvidenceKind::LocalTree, 2);
  CHECK(tree.is_object());
  CHECK_THROWS(bundle.step_payload(EvidenceKind::LocalTree, 7));
}

TEST_CASE("config json round trip and validation") {
  const auto cfg = fixture::small_pipeline_config();
  CHECK(PipelineConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  const auto partial = PipelineConfig::from_json({{"cohort", {{"n_patients", 1234}}}});
  CHECK(partial.n_patients == 1234);
  CHECK(partial.seed == PipelineConfig{}.seed);
  auto bad = cfg;
  bad.missing_rate = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("a failing stage is named") {
  fixture::TempDir dir("fail");
  auto cfg = fixture::small_pipeline_config();
  cfg.n_patients = 40;
  try {
    run_build(cfg, dir.path());
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    MESSAGE("failed at " << e.stage());
    CHECK_FALSE(e.stage().empty());
    CHECK(std::string(e.what()).find(e.stage()) != std::string::npos);
  }
  auto invalid = cfg;
  invalid.training.epochs = 0;
  CHECK_THROWS_AS(run_build(invalid, dir.path()), StageError);
}

TEST_CASE("assembling without upstream artifacts is a data error") {
  CHECK_THROWS_AS(assemble_catalog(CatalogInputs{}), DataError);
  CHECK_THROWS_AS(EvidenceBundle::load("/nonexistent/bundle"), DataError);
}

}
