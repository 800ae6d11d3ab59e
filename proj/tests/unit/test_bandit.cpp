#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "trustdss/bandit.hpp"

using namespace trustdss;

namespace {

std::vector<std::vector<double>> scripted_rewards(std::size_t steps, std::size_t arms, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> rating(1, 5);
  std::vector<std::vector<double>> out(steps, std::vector<double>(arms));
  for (auto& row : out) {
    for (auto& r : row) r = (rating(rng) - 1) / 4.0;
  }
  return out;
}

std::vector<std::size_t> library_trace(const std::vector<std::vector<double>>& rewards, const ArmCatalog& cat) {
  auto state = BanditState::fresh(cat);
  std::vector<std::size_t> trace;
  for (const auto& row : rewards) {
    const auto j = select_arm(state, cat);
    state = record_reward(state, cat, cat.arms[j].id, Reward(row[j]));
    trace.push_back(j);
  }
  return trace;
}

}  // namespace

TEST_SUITE("bandit") {

TEST_CASE("catalogs match the golden file") {
  std::ifstream in(std::string(TRUSTDSS_GOLDEN_DIR) + "/arm_catalogs.json");
  REQUIRE(in);
  const auto golden = nlohmann::json::parse(in);
  const auto [p1, p2] = build_catalogs();
  CHECK(p1.to_json() == golden.at("part1"));
  CHECK(p2.to_json() == golden.at("part2"));
  CHECK(p1.arms.size() == 8);
  CHECK(p2.arms.size() == 6);
}

TEST_CASE("catalog lookups") {
  const auto& p1 = catalog_for_part(1);
  CHECK(p1.arm('A').evidence == std::vector{EvidenceKind::Data, EvidenceKind::Accuracy});
  CHECK(p1.arm('H').evidence.size() == 5);
  CHECK(catalog_for_part(2).arm('A').evidence == std::vector{EvidenceKind::PatientInfo});
  CHECK_THROWS_AS(p1.index_of('Z'), std::invalid_argument);
  CHECK_THROWS_AS(catalog_for_part(2).index_of('G'), std::invalid_argument);
  CHECK_THROWS_AS(catalog_for_part(3), std::invalid_argument);
}

TEST_CASE("reward normalization") {
  CHECK(normalize_rating(1).value() == 0.0);
  CHECK(normalize_rating(4).value() == 0.75);
  CHECK(normalize_rating(5).value() == 1.0);
  CHECK(normalize_mean_rating(3.5).value() == doctest::Approx(0.625));
  CHECK_THROWS_AS(normalize_rating(0), std::invalid_argument);
  CHECK_THROWS_AS(normalize_rating(6), std::invalid_argument);
  CHECK_THROWS_AS(Reward(1.01), std::invalid_argument);
  CHECK_THROWS_AS(Reward(std::nan("")), std::invalid_argument);
}

TEST_CASE("fresh state pulls arms in catalog order") {
  const auto& cat = catalog_for_part(1);
  auto s = BanditState::fresh(cat);
  for (std::size_t j = 0; j < cat.arms.size(); ++j) {
    CHECK(select_arm(s, cat) == j);
    s = record_reward(s, cat, cat.arms[j].id, Reward(0.0));
  }
  CHECK(s.total_pulls == 8);
  // All equal now: ties go to the lowest index.
  CHECK(select_arm(s, cat) == 0);
}

TEST_CASE("two-arm worked example") {
  ArmCatalog cat{1, {{'A', {EvidenceKind::Data}}, {'B', {EvidenceKind::Data}}}};
  BanditState s;
  s.arms = {{2, 1.0}, {1, 1.0}};
  s.total_pulls = 3;
  CHECK(select_arm(s, cat) == 1);
  const auto b = ucb_bounds(s, cat);
  CHECK(*b[0].upper_bound == doctest::Approx(0.5 + std::sqrt(2.0 * std::log(3.0) / 2.0)));
  CHECK(*b[0].upper_bound == doctest::Approx(1.548).epsilon(1e-3));
  CHECK(*b[1].upper_bound == doctest::Approx(2.482).epsilon(1e-3));
}

TEST_CASE("selection matches the brute-force oracle on scripted sequences") {
  const auto& cat = catalog_for_part(1);
  for (std::uint64_t seq = 0; seq < 30; ++seq) {
    const auto rewards = scripted_rewards(150, cat.arms.size(), seq);
    CHECK(library_trace(rewards, cat) == oracle::ucb1_trace(rewards, cat.arms.size()));
  }
}

TEST_CASE("recording is pure and conserves counts") {
  const auto& cat = catalog_for_part(2);
  auto s = BanditState::fresh(cat);
  const auto before = s;
  const auto next = record_reward(s, cat, 'C', Reward(0.5));
  CHECK(s == before);
  CHECK(next.total_pulls == 1);
  CHECK(next.arms[2].pulls == 1);
  CHECK(next.arms[2].reward_sum == 0.5);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto j = select_arm(s, cat);
    s = record_reward(s, cat, cat.arms[j].id, Reward(static_cast<double>(rng() % 5) / 4.0));
    std::uint64_t total = 0;
    for (const auto& a : s.arms) total += a.pulls;
    REQUIRE(total == s.total_pulls);
  }
  CHECK(BanditState::from_json(s.to_json()) == s);
}

TEST_CASE("adding a constant to every reward does not change the trace") {
  const auto& cat = catalog_for_part(1);
  for (std::uint64_t seq = 0; seq < 10; ++seq) {
    auto rewards = scripted_rewards(120, cat.arms.size(), 100 + seq);
    for (auto& row : rewards) {
      for (auto& r : row) r *= 0.5;
    }
    auto shifted = rewards;
    for (auto& row : shifted) {
      for (auto& r : row) r += 0.25;
    }
    CHECK(library_trace(rewards, cat) == library_trace(shifted, cat));
  }
}

TEST_CASE("bad inputs are rejected") {
  const auto& cat = catalog_for_part(1);
  const ArmCatalog empty{1, {}};
  CHECK_THROWS_AS(select_arm(BanditState{}, empty), std::invalid_argument);
  CHECK_THROWS_AS(select_arm(BanditState::fresh(catalog_for_part(2)), cat), std::invalid_argument);
  CHECK_THROWS_AS(record_reward(BanditState::fresh(cat), cat, 'Q', Reward(0.5)), std::invalid_argument);
  BanditState broken = BanditState::fresh(cat);
  broken.total_pulls = 3;
  CHECK_THROWS_AS(select_arm(broken, cat), std::invalid_argument);
}

TEST_CASE("registry keeps one independent instance per part and role") {
  BanditRegistry reg;
  CHECK(reg.select({1, Role::Clinician}) == 'A');
  reg.record({1, Role::Clinician}, 'A', Reward(1.0));
  CHECK(reg.select({1, Role::Clinician}) == 'B');
  CHECK(reg.select({1, Role::MlExpert}) == 'A');
  CHECK(reg.select({2, Role::Clinician}) == 'A');
  CHECK(reg.snapshot({1, Role::Clinician}).total_pulls == 1);
  CHECK(reg.snapshot({1, Role::MlExpert}).total_pulls == 0);
  const auto j = reg.to_json();
  CHECK(j.at("instances").size() == 4);
}

TEST_CASE("roles round-trip through their wire names") {
  CHECK(to_string(Role::Clinician) == "clinician");
  CHECK(to_string(Role::MlExpert) == "ml_expert");
  CHECK(role_from_string("ml_expert") == Role::MlExpert);
  CHECK_THROWS_AS(role_from_string("nurse"), std::invalid_argument);
}

}
