#include "trustdss/rater_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "trustdss/api.hpp"
#include "trustdss/cohort.hpp"
#include "trustdss/random.hpp"

namespace trustdss {

namespace {

constexpr std::uint64_t kSequenceTag = 0x5e9;
constexpr std::uint64_t kUsefulnessTag = 0x05e;
constexpr std::uint64_t kRaterTag = 0x4a7e;
constexpr std::uint64_t kAllocationTag = 0xa110c;
constexpr std::uint64_t kBernoulliTag = 0xbe4;

std::uint64_t kinds_key(std::span<const EvidenceKind> kinds) {
  std::uint64_t h = 0x6b696e6473ULL;
  for (auto k : kinds) h = mix64(h ^ (static_cast<std::uint64_t>(k) + 1));
  return h;
}

double unit_uniform(std::uint64_t key) {
  return (static_cast<double>(mix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<EvidenceKind> kinds_from_json(const nlohmann::json& arr) {
  std::vector<EvidenceKind> out;
  for (const auto& k : arr) out.push_back(evidence_kind_from_string(k.get<std::string>()));
  return out;
}

}  // namespace

double RaterProfile::utility_of(EvidenceKind k) const {
  auto it = utility.find(k);
  return it == utility.end() ? 0.0 : it->second;
}

double RaterProfile::patient_offset(std::optional<std::size_t> patient) const {
  if (!patient || *patient >= patient_offsets.size()) return 0.0;
  return patient_offsets[*patient];
}

void RaterProfile::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(overload_penalty >= 0.0) || !std::isfinite(overload_penalty)) {
    throw std::invalid_argument("overload penalty must be non-negative");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw std::invalid_argument("noise sd must be non-negative");
  for (const auto& [k, u] : utility) {
    if (!std::isfinite(u)) throw std::invalid_argument("utility of " + std::string(to_string(k)) + " is not finite");
  }
  for (double o : patient_offsets) {
    if (!std::isfinite(o)) throw std::invalid_argument("patient offsets must be finite");
  }
}

nlohmann::json RaterProfile::to_json() const {
  nlohmann::json u = nlohmann::json::object();
  for (const auto& [k, v] : utility) u[std::string(to_string(k))] = v;
  return {{"utility", u},
          {"gamma", gamma},
          {"overload_penalty", overload_penalty},
          {"overload_threshold", overload_threshold},
          {"noise_sd", noise_sd},
          {"patient_offsets", patient_offsets},
          {"seed", seed}};
}

RaterProfile RaterProfile::from_json(const nlohmann::json& j) {
  RaterProfile p;
  for (const auto& [k, v] : j.at("utility").items()) p.utility[evidence_kind_from_string(k)] = v.get<double>();
  p.gamma = j.value("gamma", 1.0);
  p.overload_penalty = j.value("overload_penalty", 0.0);
  p.overload_threshold = j.value("overload_threshold", std::size_t{5});
  p.noise_sd = j.value("noise_sd", 0.0);
  p.patient_offsets = j.value("patient_offsets", std::vector<double>{});
  p.seed = j.value("seed", std::uint64_t{0});
  p.validate();
  return p;
}

int rating_from_score(double raw) {
  const double scaled = 1.0 + 4.0 * raw;
  if (!(scaled > 1.0)) return 1;
  if (scaled >= 5.0) return 5;
  return static_cast<int>(std::clamp<long>(std::lround(scaled), 1, 5));
}

double noise_free_score(const RaterProfile& profile, std::span<const EvidenceKind> kinds,
                        std::optional<std::size_t> patient) {
  double s = 0.0;
  for (auto k : kinds) s += profile.utility_of(k);
  const double concave = std::copysign(std::pow(std::abs(s), profile.gamma), s);
  const double excess =
      kinds.size() > profile.overload_threshold ? static_cast<double>(kinds.size() - profile.overload_threshold) : 0.0;
  return concave - profile.overload_penalty * excess + profile.patient_offset(patient);
}

double keyed_normal(std::uint64_t key) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, unit_uniform(key));
}

int rate_sequence(const RaterProfile& profile, std::span<const EvidenceKind> kinds, std::uint64_t draw_index,
                  std::optional<std::size_t> patient) {
  if (kinds.empty()) throw std::invalid_argument("cannot rate an empty sequence");
  double raw = noise_free_score(profile, kinds, patient);
  if (profile.noise_sd > 0.0) {
    const std::uint64_t key =
        derive_seed(profile.seed, {kSequenceTag, kinds_key(kinds), draw_index, patient ? *patient + 1 : 0});
    raw += profile.noise_sd * keyed_normal(key);
  }
  return rating_from_score(raw);
}

int rate_usefulness(const RaterProfile& profile, EvidenceKind kind, std::uint64_t draw_index) {
  double raw = profile.utility_of(kind);
  if (profile.noise_sd > 0.0) {
    const std::uint64_t key =
        derive_seed(profile.seed, {kUsefulnessTag, static_cast<std::uint64_t>(kind), draw_index});
    raw += profile.noise_sd * keyed_normal(key);
  }
  return rating_from_score(raw);
}

double expected_rating_from_score(double mean_score, double noise_sd) {
  if (noise_sd <= 0.0) return rating_from_score(mean_score);
  const double m = 1.0 + 4.0 * mean_score;
  const double s = 4.0 * noise_sd;
  const boost::math::normal_distribution<double> standard;
  auto cdf = [&](double edge) { return boost::math::cdf(standard, (edge - m) / s); };
  double e = 1.0 * cdf(1.5) + 5.0 * (1.0 - cdf(4.5));
  for (int r = 2; r <= 4; ++r) e += r * (cdf(r + 0.5) - cdf(r - 0.5));
  return e;
}

double expected_rating(const RaterProfile& profile, std::span<const EvidenceKind> kinds,
                       std::optional<std::size_t> patient) {
  return expected_rating_from_score(noise_free_score(profile, kinds, patient), profile.noise_sd);
}

double expected_reward(const RaterProfile& profile, int part, const Arm& arm, std::size_t patients) {
  if (part == 1) return (expected_rating(profile, arm.evidence) - 1.0) / 4.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < patients; ++p) sum += expected_rating(profile, arm.evidence, p);
  return (sum / static_cast<double>(patients) - 1.0) / 4.0;
}

void Population::validate() const {
  if (groups.empty()) throw std::invalid_argument("population has no groups");
  for (const auto& g : groups) {
    if (!(g.weight > 0.0) || !std::isfinite(g.weight)) {
      throw std::invalid_argument("group '" + g.name + "' needs a positive weight");
    }
    g.profile.validate();
  }
}

nlohmann::json Population::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups) {
    arr.push_back({{"name", g.name}, {"role", to_string(g.role)}, {"weight", g.weight}, {"profile", g.profile.to_json()}});
  }
  return {{"schema_version", 1}, {"groups", arr}};
}

Population Population::from_json(const nlohmann::json& j) {
  Population p;
  for (const auto& g : j.at("groups")) {
    p.groups.push_back({g.at("name").get<std::string>(), role_from_string(g.at("role").get<std::string>()),
                        g.value("weight", 1.0), RaterProfile::from_json(g.at("profile"))});
  }
  p.validate();
  return p;
}

RaterProfile clinician_like_profile() {
  using K = EvidenceKind;
  RaterProfile p;
  p.utility = {{K::Data, 0.12},        {K::Methodology, 0.20}, {K::Accuracy, 0.12},    {K::StratifiedLinear, 0.08},
               {K::StratifiedTree, 0.10}, {K::PatientInfo, 0.15}, {K::Sensitivity, 0.25}, {K::LocalLinear, 0.02},
               {K::LocalTree, 0.10},   {K::Outcome, 0.12}};
  p.gamma = 0.8;
  p.overload_penalty = 0.15;
  p.overload_threshold = 4;
  p.noise_sd = 0.15;
  p.patient_offsets = {0.05, 0.0, -0.05, 0.02};
  p.seed = 101;
  return p;
}

RaterProfile expert_like_profile() {
  using K = EvidenceKind;
  RaterProfile p;
  p.utility = {{K::Data, 0.15},        {K::Methodology, 0.05}, {K::Accuracy, 0.18},    {K::StratifiedLinear, 0.15},
               {K::StratifiedTree, 0.12}, {K::PatientInfo, 0.12}, {K::Sensitivity, 0.08}, {K::LocalLinear, 0.22},
               {K::LocalTree, 0.12},   {K::Outcome, 0.15}};
  p.gamma = 0.9;
  p.overload_penalty = 0.04;
  p.overload_threshold = 4;
  p.noise_sd = 0.15;
  p.patient_offsets = {0.0, 0.03, -0.03, 0.0};
  p.seed = 202;
  return p;
}

RaterProfile planted_gap_profile() {
  using K = EvidenceKind;
  RaterProfile p;
  p.utility = {{K::Data, 0.10},         {K::Methodology, -0.15}, {K::Accuracy, 0.10},    {K::StratifiedLinear, -0.15},
               {K::StratifiedTree, 0.35}, {K::PatientInfo, 0.10}, {K::Sensitivity, 0.20}, {K::LocalLinear, -0.10},
               {K::LocalTree, 0.15},    {K::Outcome, 0.10}};
  p.gamma = 1.0;
  p.overload_penalty = 0.0;
  p.overload_threshold = 5;
  p.noise_sd = 0.10;
  p.seed = 303;
  return p;
}

Population default_population() {
  return {{{"clinician-like", Role::Clinician, 14.0, clinician_like_profile()},
           {"expert-like", Role::MlExpert, 30.0, expert_like_profile()}}};
}

std::vector<std::size_t> allocate_sessions(const Population& population, std::size_t n_sessions, std::uint64_t seed) {
  population.validate();
  const auto& g = population.groups;
  const double total = std::accumulate(g.begin(), g.end(), 0.0, [](double s, const RaterGroup& x) { return s + x.weight; });
  std::vector<std::size_t> counts(g.size());
  std::vector<double> remainder(g.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double quota = static_cast<double>(n_sessions) * g[i].weight / total;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n_sessions; ++i, ++assigned) ++counts[order[i % order.size()]];

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) out.insert(out.end(), counts[i], i);
  Rng rng(derive_seed(seed, {kAllocationTag}));
  for (std::size_t i = out.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(out[i - 1], out[pick(rng)]);
  }
  return out;
}

std::vector<double> role_arm_means(const Population& population, const std::vector<std::size_t>& allocation, Role role,
                                   int part) {
  std::vector<double> w(population.groups.size(), 0.0);
  for (auto gi : allocation) w[gi] += 1.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (population.groups[i].role != role) w[i] = 0.0;
    wsum += w[i];
  }
  if (wsum == 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = population.groups[i].role == role ? population.groups[i].weight : 0.0;
      wsum += w[i];
    }
  }
  const auto& catalog = catalog_for_part(part);
  std::vector<double> means(catalog.arms.size(), 0.0);
  if (wsum == 0.0) return means;
  for (std::size_t a = 0; a < catalog.arms.size(); ++a) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] > 0.0) means[a] += w[i] / wsum * expected_reward(population.groups[i].profile, part, catalog.arms[a]);
    }
  }
  return means;
}

std::map<BanditKey, double> SimulationTrace::final_regret() const {
  std::map<BanditKey, double> out;
  for (const auto& r : rows) out[{r.part, r.role}] = r.cumulative_regret;
  return out;
}

void SimulationTrace::write_csv(std::ostream& out) const {
  out << "pull_index,session_index,session_id,group,role,part,arm,reward,expected_reward,cumulative_regret\n";
  for (const auto& r : rows) {
    out << r.pull_index << ',' << r.session_index << ',' << r.session_id << ',' << r.group << ',' << to_string(r.role)
        << ',' << r.part << ',' << r.arm << ',' << format_double(r.reward) << ',' << format_double(r.expected_reward)
        << ',' << format_double(r.cumulative_regret) << '\n';
  }
}

SimulationTrace run_simulation(const Population& population, std::size_t n_sessions, std::uint64_t seed,
                               SurveyClient& client, std::size_t first, std::optional<std::size_t> count) {
  const auto allocation = allocate_sessions(population, n_sessions, seed);
  const std::size_t last = std::min(n_sessions, count ? first + *count : n_sessions);

  std::map<BanditKey, std::vector<double>> means;
  std::map<BanditKey, double> best;
  std::map<BanditKey, double> regret;
  for (int part : {1, 2}) {
    for (auto role : kAllRoles) {
      auto m = role_arm_means(population, allocation, role, part);
      best[{part, role}] = *std::max_element(m.begin(), m.end());
      means[{part, role}] = std::move(m);
    }
  }

  SimulationTrace trace;
  for (std::size_t i = first; i < last; ++i) {
    const auto& group = population.groups[allocation[i]];
    RaterProfile rater = group.profile;
    rater.seed = derive_seed(group.profile.seed, {kRaterTag, seed, i});

    const auto start = client.start_session(group.role);
    const auto id = start.at("session_id").get<std::string>();
    trace.session_ids.push_back(id);

    for (;;) {
      const auto step = client.next_step(id);
      if (step.at("type") == "completion") break;
      const auto expects = rating_kind_from_string(step.at("expected_rating").get<std::string>());
      if (expects == RatingKind::None) continue;
      const auto ref = step.at("step_ref").get<std::size_t>();
      int rating = 1;
      if (expects == RatingKind::Usefulness) {
        rating = rate_usefulness(rater, evidence_kind_from_string(step.at("evidence_kind").get<std::string>()), ref);
      } else {
        const auto kinds = kinds_from_json(step.at("shown_evidence"));
        std::optional<std::size_t> patient;
        if (!step.at("patient_index").is_null()) patient = step.at("patient_index").get<std::size_t>();
        rating = rate_sequence(rater, kinds, patient ? *patient + 1 : 0, patient);
      }
      const auto ack = client.submit_rating(id, expects, rating, ref);
      if (ack.contains("bandit_update")) {
        const BanditKey key{ack["bandit_update"]["part"].get<int>(), group.role};
        const char arm = step.at("arm").get<std::string>()[0];
        const double mu = means[key][catalog_for_part(key.part).index_of(arm)];
        regret[key] += best[key] - mu;
        trace.rows.push_back({trace.rows.size(), i, id, group.name, group.role, key.part, arm,
                              ack["bandit_update"]["reward"].get<double>(), mu, regret[key]});
      }
    }
  }
  return trace;
}

RewardSource bernoulli_source(std::vector<double> means, std::uint64_t seed) {
  for (double m : means) {
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("Bernoulli means must lie in [0, 1]");
  }
  RewardSource src;
  src.true_means = means;
  src.draw = [means, seed](std::size_t arm, std::uint64_t pull) {
    return unit_uniform(derive_seed(seed, {kBernoulliTag, arm, pull})) < means[arm] ? 1.0 : 0.0;
  };
  return src;
}

RewardSource profile_source(const RaterProfile& profile, const ArmCatalog& catalog, std::uint64_t seed) {
  profile.validate();
  RewardSource src;
  for (const auto& a : catalog.arms) src.true_means.push_back(expected_reward(profile, catalog.part, a));
  RaterProfile rater = profile;
  rater.seed = derive_seed(profile.seed, {kRaterTag, seed});
  src.draw = [rater, catalog](std::size_t arm, std::uint64_t pull) {
    const auto& kinds = catalog.arms[arm].evidence;
    if (catalog.part == 1) return normalize_rating(rate_sequence(rater, kinds, pull)).value();
    int sum = 0;
    for (std::size_t p = 0; p < 4; ++p) sum += rate_sequence(rater, kinds, pull, p);
    return normalize_mean_rating(sum / 4.0).value();
  };
  return src;
}

double BanditTrial::share_of(std::size_t arm, std::size_t from, std::size_t to) const {
  to = std::min(to, arms.size());
  if (from >= to) return 0.0;
  const auto n = std::count(arms.begin() + static_cast<long>(from), arms.begin() + static_cast<long>(to), arm);
  return static_cast<double>(n) / static_cast<double>(to - from);
}

BanditTrial run_bandit_trial(const ArmCatalog& catalog, const RewardSource& source, std::size_t n_pulls) {
  if (source.true_means.size() != catalog.arms.size()) throw std::invalid_argument("one true mean per arm required");
  const double best = *std::max_element(source.true_means.begin(), source.true_means.end());
  BanditTrial trial;
  trial.final_state = BanditState::fresh(catalog);
  double regret = 0.0;
  for (std::size_t t = 0; t < n_pulls; ++t) {
    const std::size_t j = select_arm(trial.final_state, catalog);
    const double r = source.draw(j, t);
    trial.final_state = record_reward(trial.final_state, catalog, catalog.arms[j].id, Reward(r));
    regret += best - source.true_means[j];
    trial.arms.push_back(j);
    trial.rewards.push_back(r);
    trial.cumulative_regret.push_back(regret);
  }
  return trial;
}

}  // namespace trustdss
