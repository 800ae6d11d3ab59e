#include <doctest.h>

#include <cmath>
#include <sstream>

#include "trustdss/cohort.hpp"
#include "trustdss/random.hpp"

using namespace trustdss;

namespace {

// RMSE over the masked continuous cells, each column in units of its true
// standard deviation.
double standardized_rmse(const CohortTable& truth, const CohortTable& masked, const CohortTable& filled) {
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < truth.num_features(); ++c) {
    if (truth.schema()[c].is_binary()) continue;
    double mean = 0.0;
    for (std::size_t r = 0; r < truth.num_rows(); ++r) mean += truth.value(r, c);
    mean /= static_cast<double>(truth.num_rows());
    double var = 0.0;
    for (std::size_t r = 0; r < truth.num_rows(); ++r) var += std::pow(truth.value(r, c) - mean, 2);
    const double sd = std::sqrt(var / static_cast<double>(truth.num_rows() - 1));
    for (std::size_t r = 0; r < truth.num_rows(); ++r) {
      if (!masked.missing(r, c)) continue;
      sse += std::pow((filled.value(r, c) - truth.value(r, c)) / sd, 2);
      ++n;
    }
  }
  return std::sqrt(sse / static_cast<double>(n));
}

}  // namespace

TEST_SUITE("cohort") {

TEST_CASE("schema has 31 uniquely named features and round-trips through json") {
  const auto s = FeatureSchema::heart_failure();
  CHECK(s.size() == kNumFeatures);
  CHECK(FeatureSchema::from_json(s.to_json()) == s);
  CHECK_THROWS_AS(s.index_of("no_such_feature"), std::out_of_range);
  auto feats = s.features();
  feats[1].name = feats[0].name;
  CHECK_THROWS_AS(FeatureSchema{feats}, std::invalid_argument);
}

TEST_CASE("generator hits shape, ranges and prevalence") {
  GeneratorConfig cfg;
  cfg.n_patients = 5000;
  cfg.seed = 3;
  const auto c = generate_cohort(cfg);
  CHECK(c.num_rows() == 5000);
  CHECK(c.num_features() == kNumFeatures);
  CHECK(c.missing_count() == 0);
  CHECK(std::abs(c.prevalence() - 0.188) < 0.02);
  for (std::size_t r = 0; r < c.num_rows(); r += 97) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const auto& f = c.schema()[j];
      CHECK(c.value(r, j) >= f.min);
      CHECK(c.value(r, j) <= f.max);
      if (f.is_binary()) CHECK((c.value(r, j) == 0.0 || c.value(r, j) == 1.0));
    }
  }
  CHECK(generate_cohort(cfg) == c);
}

TEST_CASE("missingness leaves labels alone and hits the rate") {
  GeneratorConfig cfg;
  cfg.n_patients = 3000;
  const auto c = generate_cohort(cfg);
  const auto m = inject_missingness(c, 0.1, 5);
  CHECK(m.outcomes() == c.outcomes());
  const double rate = static_cast<double>(m.missing_count()) / static_cast<double>(c.num_rows() * kNumFeatures);
  CHECK(rate == doctest::Approx(0.1).epsilon(0.05));
  for (std::size_t r = 0; r < c.num_rows(); ++r) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (!m.missing(r, j)) CHECK(m.value(r, j) == c.value(r, j));
    }
  }
}

TEST_CASE("chained equations recover a planted exact linear relation") {
  GeneratorConfig cfg;
  cfg.n_patients = 400;
  const auto base = generate_cohort(cfg);
  const auto& schema = base.schema();
  const std::size_t x1 = schema.index_of("diastolic_bp");
  const std::size_t x2 = schema.index_of("systolic_bp");
  std::vector<double> v = base.values();
  Rng rng(17);
  std::uniform_real_distribution<double> u(40.0, 65.0);
  for (std::size_t r = 0; r < base.num_rows(); ++r) {
    v[r * kNumFeatures + x1] = u(rng);
    v[r * kNumFeatures + x2] = 2.0 * v[r * kNumFeatures + x1];
  }
  const std::size_t hole = 123;
  const double expected = v[hole * kNumFeatures + x2];
  v[hole * kNumFeatures + x2] = kMissing;
  const CohortTable with_hole(schema, v, base.outcomes());

  for (int cycles : {2, 5, 10}) {
    const auto filled = impute_mice(with_hole, cycles);
    CHECK(filled.missing_count() == 0);
    CHECK(std::abs(filled.value(hole, x2) - expected) < 1e-6);
  }
}

TEST_CASE("chained equations beat mean imputation and keep observed cells") {
  GeneratorConfig cfg;
  cfg.n_patients = 4000;
  cfg.seed = 21;
  const auto truth = generate_cohort(cfg);
  const auto masked = inject_missingness(truth, 0.1, 9);
  const auto mice = impute_mice(masked, 10);
  const auto mean = impute_mean(masked);
  CHECK(mice.missing_count() == 0);
  CHECK(mean.missing_count() == 0);
  for (std::size_t r = 0; r < truth.num_rows(); ++r) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (!masked.missing(r, j)) REQUIRE(mice.value(r, j) == masked.value(r, j));
      if (truth.schema()[j].is_binary()) REQUIRE((mice.value(r, j) == 0.0 || mice.value(r, j) == 1.0));
    }
  }
  const double rm = standardized_rmse(truth, masked, mice);
  const double rb = standardized_rmse(truth, masked, mean);
  MESSAGE("mice rmse " << rm << " mean rmse " << rb);
  CHECK(rm <= 0.8 * rb);
}

TEST_CASE("imputation rejects bad arguments") {
  GeneratorConfig cfg;
  cfg.n_patients = 50;
  const auto c = generate_cohort(cfg);
  CHECK_THROWS(impute_mice(c, 0));
  CHECK_THROWS(inject_missingness(c, 1.5, 1));
}

TEST_CASE("csv round trip keeps values and missing cells") {
  GeneratorConfig cfg;
  cfg.n_patients = 60;
  const auto c = inject_missingness(generate_cohort(cfg), 0.2, 4);
  std::stringstream ss;
  write_cohort_csv(ss, c);
  const auto back = read_cohort_csv(ss, c.schema());
  REQUIRE(back.num_rows() == c.num_rows());
  CHECK(back.outcomes() == c.outcomes());
  for (std::size_t r = 0; r < c.num_rows(); ++r) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      CHECK(back.missing(r, j) == c.missing(r, j));
      if (!c.missing(r, j)) CHECK(back.value(r, j) == c.value(r, j));
    }
  }
}

}
