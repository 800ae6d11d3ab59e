#include "trustdss/bandit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace trustdss {

std::string_view to_string(Role role) { return role == Role::Clinician ? "clinician" : "ml_expert"; }

Role role_from_string(std::string_view s) {
  if (s == "clinician") return Role::Clinician;
  if (s == "ml_expert") return Role::MlExpert;
  throw std::invalid_argument("unknown role: " + std::string(s));
}

std::size_t ArmCatalog::index_of(char arm_id) const {
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i].id == arm_id) return i;
  }
  throw std::invalid_argument("part " + std::to_string(part) + " has no arm '" + std::string(1, arm_id) + "'");
}

nlohmann::json ArmCatalog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : a.evidence) kinds.push_back(to_string(k));
    arr.push_back({{"arm", std::string(1, a.id)}, {"evidence", kinds}});
  }
  return {{"part", part}, {"arms", arr}};
}

ArmCatalog part1_catalog() {
  using K = EvidenceKind;
  constexpr K D = K::Data, M = K::Methodology, Acc = K::Accuracy, L = K::StratifiedLinear, T = K::StratifiedTree;
  return {1,
          {{'A', {D, Acc}},
           {'B', {D, Acc, T}},
           {'C', {D, Acc, L}},
           {'D', {D, Acc, L, T}},
           {'E', {D, M, Acc}},
           {'F', {D, M, Acc, T}},
           {'G', {D, M, Acc, L}},
           {'H', {D, M, Acc, L, T}}}};
}

ArmCatalog part2_catalog() {
  using K = EvidenceKind;
  constexpr K P = K::PatientInfo, S = K::Sensitivity, L = K::LocalLinear, T = K::LocalTree, O = K::Outcome;
  return {2,
          {{'A', {P}},
           {'B', {P, S}},
           {'C', {P, S, O}},
           {'D', {P, S, L, O}},
           {'E', {P, S, T, O}},
           {'F', {P, S, L, T, O}}}};
}

std::pair<ArmCatalog, ArmCatalog> build_catalogs() { return {part1_catalog(), part2_catalog()}; }

const ArmCatalog& catalog_for_part(int part) {
  static const ArmCatalog p1 = part1_catalog();
  static const ArmCatalog p2 = part2_catalog();
  if (part == 1) return p1;
  if (part == 2) return p2;
  throw std::invalid_argument("part must be 1 or 2");
}

Reward::Reward(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("reward must lie in [0, 1]");
}

Reward normalize_rating(int rating) {
  if (rating < 1 || rating > 5) throw std::invalid_argument("rating must be an integer from 1 to 5");
  return Reward((rating - 1) / 4.0);
}

Reward normalize_mean_rating(double mean_rating) {
  if (!(mean_rating >= 1.0 && mean_rating <= 5.0)) throw std::invalid_argument("mean rating must lie in [1, 5]");
  return Reward((mean_rating - 1.0) / 4.0);
}

BanditState BanditState::fresh(const ArmCatalog& catalog) {
  BanditState s;
  s.arms.resize(catalog.arms.size());
  return s;
}

nlohmann::json BanditState::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : arms) arr.push_back({{"pulls", a.pulls}, {"reward_sum", a.reward_sum}});
  return {{"total_pulls", total_pulls}, {"arms", arr}};
}

BanditState BanditState::from_json(const nlohmann::json& j) {
  BanditState s;
  s.total_pulls = j.at("total_pulls").get<std::uint64_t>();
  for (const auto& a : j.at("arms")) {
    s.arms.push_back({a.at("pulls").get<std::uint64_t>(), a.at("reward_sum").get<double>()});
  }
  return s;
}

double ucb_value(double mean, std::uint64_t arm_pulls, std::uint64_t total_pulls) {
  return mean + std::sqrt(2.0 * std::log(static_cast<double>(total_pulls)) / static_cast<double>(arm_pulls));
}

namespace {

void check_state(const BanditState& state, const ArmCatalog& catalog) {
  if (catalog.arms.empty()) throw std::invalid_argument("arm catalog is empty");
  if (state.arms.size() != catalog.arms.size()) throw std::invalid_argument("bandit state does not match catalog");
  std::uint64_t pulls = 0;
  for (const auto& a : state.arms) pulls += a.pulls;
  if (pulls != state.total_pulls) throw std::invalid_argument("arm pulls do not add up to the total");
}

}  // namespace

std::size_t select_arm(const BanditState& state, const ArmCatalog& catalog) {
  check_state(state, catalog);
  for (std::size_t j = 0; j < state.arms.size(); ++j) {
    if (state.arms[j].pulls == 0) return j;
  }
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < state.arms.size(); ++j) {
    const double v = ucb_value(state.arms[j].mean(), state.arms[j].pulls, state.total_pulls);
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

BanditState record_reward(const BanditState& state, const ArmCatalog& catalog, char arm_id, Reward reward) {
  check_state(state, catalog);
  const std::size_t j = catalog.index_of(arm_id);
  BanditState next = state;
  next.arms[j].pulls += 1;
  next.arms[j].reward_sum += reward.value();
  next.total_pulls += 1;
  return next;
}

std::vector<ArmBound> ucb_bounds(const BanditState& state, const ArmCatalog& catalog) {
  check_state(state, catalog);
  std::vector<ArmBound> out;
  for (std::size_t j = 0; j < state.arms.size(); ++j) {
    const auto& a = state.arms[j];
    ArmBound b{catalog.arms[j].id, a.pulls, a.mean(), std::nullopt};
    if (a.pulls > 0) b.upper_bound = ucb_value(a.mean(), a.pulls, state.total_pulls);
    out.push_back(b);
  }
  return out;
}

BanditRegistry::BanditRegistry() {
  for (int part : {1, 2}) {
    for (auto role : kAllRoles) states_[{part, role}] = BanditState::fresh(catalog_for_part(part));
  }
}

char BanditRegistry::select(BanditKey key) const {
  std::lock_guard lock(mutex_);
  const auto& catalog = catalog_for_part(key.part);
  return catalog.arms[select_arm(states_.at(key), catalog)].id;
}

void BanditRegistry::record(BanditKey key, char arm_id, Reward reward) {
  std::lock_guard lock(mutex_);
  auto& st = states_.at(key);
  st = record_reward(st, catalog_for_part(key.part), arm_id, reward);
}

BanditState BanditRegistry::snapshot(BanditKey key) const {
  std::lock_guard lock(mutex_);
  return states_.at(key);
}

std::map<BanditKey, BanditState> BanditRegistry::snapshot_all() const {
  std::lock_guard lock(mutex_);
  return states_;
}

nlohmann::json BanditRegistry::to_json() const {
  const auto all = snapshot_all();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, st] : all) {
    const auto& catalog = catalog_for_part(key.part);
    nlohmann::json arms = nlohmann::json::array();
    for (std::size_t j = 0; j < st.arms.size(); ++j) {
      arms.push_back({{"arm", std::string(1, catalog.arms[j].id)},
                      {"pulls", st.arms[j].pulls},
                      {"reward_sum", st.arms[j].reward_sum}});
    }
    arr.push_back({{"part", key.part}, {"role", to_string(key.role)}, {"total_pulls", st.total_pulls}, {"arms", arms}});
  }
  return {{"schema_version", 1}, {"instances", arr}};
}

}  // namespace trustdss
