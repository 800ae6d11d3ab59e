#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "trustdss/cohort.hpp"
#include "trustdss/error.hpp"
#include "trustdss/scenarios.hpp"
#include "trustdss/surrogate.hpp"

using namespace trustdss;

namespace {

struct StepScorer : RiskScorer {
  std::size_t feature = 0;
  double at = 0.0;
  double risk(std::span<const double> x) const override { return x[feature] < at ? 0.1 : 0.9; }
};

// Linear in raw units around the cohort centre.
struct LinearScorer : RiskScorer {
  std::vector<double> w = std::vector<double>(kNumFeatures, 0.0);
  std::vector<double> centre = std::vector<double>(kNumFeatures, 0.0);
  double risk(std::span<const double> x) const override {
    double r = 0.5;
    for (std::size_t j = 0; j < kNumFeatures; ++j) r += w[j] * (x[j] - centre[j]);
    return std::clamp(r, 0.0, 1.0);
  }
};

// Smooth nonlinear scorer spanning every stratum.
struct WavyScorer : RiskScorer {
  double risk(std::span<const double> x) const override {
    const double z = (x[0] - 65.0) / 12.0 + 0.8 * std::sin(x[5] / 9.0) + 0.6 * x[1] - 0.3;
    return 1.0 / (1.0 + std::exp(-1.6 * z));
  }
};

CohortTable cohort(std::size_t n, std::uint64_t seed) {
  GeneratorConfig g;
  g.n_patients = n;
  g.seed = seed;
  return generate_cohort(g);
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("strata are left-closed quintiles") {
  CHECK(stratum_of(0.0) == 0);
  CHECK(stratum_of(0.19999) == 0);
  CHECK(stratum_of(0.2) == 1);
  CHECK(stratum_of(0.6) == 3);
  CHECK(stratum_of(0.8) == 4);
  CHECK(stratum_of(1.0) == 4);
  CHECK(stratum_bounds(2).first == doctest::Approx(0.4));
  CHECK(stratum_bounds(2).second == doctest::Approx(0.6));
}

TEST_CASE("a threshold step is recovered as a depth-1 tree") {
  const auto c = cohort(2000, 3);
  StepScorer step;
  step.feature = c.schema().index_of("age");
  step.at = 60.0;
  const auto y = step.risks(c);
  const auto tree = fit_regression_tree(c.feature_matrix(), y);
  CHECK(tree.depth() == 1);
  CHECK(tree.nodes()[0].feature == static_cast<int>(step.feature));
  double mse = 0.0;
  for (std::size_t r = 0; r < c.num_rows(); ++r) mse += std::pow(tree.predict(c.row(r)) - y[r], 2);
  mse /= static_cast<double>(c.num_rows());
  CHECK(mse < 1e-6);
  // The split sits between the last value below 60 and the first at or above.
  double below = -1e300;
  double above = 1e300;
  for (std::size_t r = 0; r < c.num_rows(); ++r) {
    const double v = c.value(r, step.feature);
    if (v < 60.0) below = std::max(below, v);
    else above = std::min(above, v);
  }
  CHECK(tree.nodes()[0].threshold == doctest::Approx(0.5 * (below + above)));
}

TEST_CASE("stratified trees respect the depth cap and the unit interval") {
  const auto c = cohort(3000, 4);
  WavyScorer m;
  const auto trees = fit_stratified_trees(m, c);
  for (const auto& t : trees) {
    CHECK(t.tree.depth() <= 3);
    CHECK(t.tree.leaf_count() <= 8);
    for (const auto& n : t.tree.nodes()) {
      if (!n.is_leaf()) continue;
      CHECK(n.value >= 0.0);
      CHECK(n.value <= 1.0);
      CHECK(n.n >= 5);
    }
    CHECK(t.fidelity_mse <= t.target_variance + 1e-12);
    const auto back = RegressionTree::from_json(t.tree.to_json(c.schema()), c.schema());
    for (std::size_t r = 0; r < c.num_rows(); r += 31) CHECK(back.predict(c.row(r)) == t.tree.predict(c.row(r)));
  }
}

TEST_CASE("stratified linear fits recover a planted linear model") {
  const auto c = cohort(4000, 5);
  LinearScorer m;
  const std::size_t age = c.schema().index_of("age");
  const std::size_t hr = c.schema().index_of("heart_rate");
  const std::size_t male = c.schema().index_of("male");
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < c.num_rows(); ++r) s += c.value(r, j);
    m.centre[j] = s / static_cast<double>(c.num_rows());
  }
  m.w[age] = 0.012;
  m.w[hr] = -0.006;
  m.w[male] = 0.08;
  const auto strata = fit_stratified_linear(m, c);
  // The outer quintiles contain clamped rows, so exactness is checked in the
  // interior ones.
  for (int k = 1; k <= 3; ++k) {
    const auto& s = strata[static_cast<std::size_t>(k)];
    REQUIRE_FALSE(s.sparse);
    for (std::size_t j : {age, hr, male}) {
      CHECK(std::abs(s.coefficients[j].coefficient - m.w[j]) <= 0.05 * std::abs(m.w[j]));
      CHECK(s.coefficients[j].significant);
    }
    CHECK(s.fidelity_mse < 1e-12);
  }
}

TEST_CASE("an empty stratum is a data error") {
  const auto c = cohort(300, 6);
  StepScorer step;
  step.at = -1.0;  // everyone in the top stratum
  CHECK_THROWS_AS(fit_stratified_linear(step, c), DataError);
}

TEST_CASE("malformed trees are rejected") {
  std::vector<TreeNode> nodes(1);
  nodes[0].feature = 0;
  nodes[0].left = 5;
  nodes[0].right = 6;
  CHECK_THROWS_AS(RegressionTree{nodes}, std::invalid_argument);
}

}

TEST_SUITE("scenarios") {

TEST_CASE("sensitivity table contains the identity entry") {
  const auto c = cohort(500, 7);
  WavyScorer m;
  for (std::size_t r = 0; r < 20; ++r) {
    const auto t = build_sensitivity(m, c.schema(), c.row(r), r);
    CHECK(t.baseline_risk == m.risk(c.row(r)));
    CHECK(t.features[0].feature != t.features[1].feature);
    for (const auto& f : t.features) {
      CHECK(f.current_value == c.value(r, f.feature));
      int current = 0;
      for (std::size_t i = 0; i < f.entries.size(); ++i) {
        if (i) CHECK(f.entries[i - 1].value < f.entries[i].value);
        if (f.entries[i].is_current) {
          ++current;
          CHECK(f.entries[i].value == f.current_value);
          CHECK(f.entries[i].risk == t.baseline_risk);
        }
      }
      CHECK(current == 1);
    }
  }
}

TEST_CASE("patient scenarios are distinct and nearest to the targets") {
  const auto c = cohort(1500, 8);
  WavyScorer m;
  std::vector<std::size_t> test_rows;
  for (std::size_t r = 0; r < c.num_rows(); r += 3) test_rows.push_back(r);
  const auto sc = select_patient_scenarios(m, c, test_rows, 1);
  REQUIRE(sc.size() == kScenarioCount);
  std::set<std::size_t> ids;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    ids.insert(sc[i].patient_id);
    CHECK(sc[i].predicted_risk == m.risk(c.row(sc[i].patient_id)));
    CHECK(std::abs(sc[i].predicted_risk - kScenarioRiskTargets[i]) < 0.05);
    CHECK(sc[i].patient_id % 3 == 0);
    CHECK_FALSE(sc[i].display_name.empty());
  }
  CHECK(ids.size() == kScenarioCount);
}

}
