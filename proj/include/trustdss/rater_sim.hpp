#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/bandit.hpp"
#include "trustdss/evidence_kind.hpp"

namespace trustdss {

class SurveyClient;

// Additive-utility rater: raw = sgn(S)|S|^gamma - lambda * max(0, len - k)
// + offset + noise, with S the summed utility of the shown evidence. The
// rating is round(1 + 4 * raw) clipped to 1..5.
struct RaterProfile {
  std::map<EvidenceKind, double> utility;  // missing kinds count as 0
  double gamma = 1.0;
  double overload_penalty = 0.0;
  std::size_t overload_threshold = 5;
  double noise_sd = 0.0;
  std::vector<double> patient_offsets;  // added to Part 2 scores, per patient
  std::uint64_t seed = 0;

  double utility_of(EvidenceKind k) const;
  double patient_offset(std::optional<std::size_t> patient) const;
  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
  static RaterProfile from_json(const nlohmann::json& j);
};

int rating_from_score(double raw);
double noise_free_score(const RaterProfile& profile, std::span<const EvidenceKind> kinds,
                        std::optional<std::size_t> patient = std::nullopt);

// Standard normal draw keyed entirely by `key`.
double keyed_normal(std::uint64_t key);

// Confidence rating for a shown sequence. Deterministic in (profile, kinds,
// draw index, patient).
int rate_sequence(const RaterProfile& profile, std::span<const EvidenceKind> kinds, std::uint64_t draw_index,
                  std::optional<std::size_t> patient = std::nullopt);
// Usefulness rating of one piece: round(1 + 4 * (u_k + noise)) clipped.
int rate_usefulness(const RaterProfile& profile, EvidenceKind kind, std::uint64_t draw_index);

// Closed-form expectation of the rounded, clipped normal score.
double expected_rating_from_score(double mean_score, double noise_sd);
double expected_rating(const RaterProfile& profile, std::span<const EvidenceKind> kinds,
                       std::optional<std::size_t> patient = std::nullopt);
// Expected bandit reward of an arm: Part 1 normalizes one rating, Part 2 the
// mean over `patients` patient ratings.
double expected_reward(const RaterProfile& profile, int part, const Arm& arm, std::size_t patients = 4);

struct RaterGroup {
  std::string name;
  Role role = Role::Clinician;
  double weight = 1.0;
  RaterProfile profile;
};

struct Population {
  std::vector<RaterGroup> groups;

  void validate() const;
  nlohmann::json to_json() const;
  static Population from_json(const nlohmann::json& j);
};

// Overloaded clinician-like raters and expert-like raters with inverted
// tastes, weighted 14 : 30.
Population default_population();
RaterProfile clinician_like_profile();
RaterProfile expert_like_profile();
// Stationary profile whose best Part 1 arm beats the runner-up by more than
// 0.1 in expected reward.
RaterProfile planted_gap_profile();

// Group index for each of n sessions: largest-remainder quotas by weight,
// then a seeded shuffle.
std::vector<std::size_t> allocate_sessions(const Population& population, std::size_t n_sessions, std::uint64_t seed);

// True mean reward per arm for the raters of one role (weighted by their
// allocated session counts).
std::vector<double> role_arm_means(const Population& population, const std::vector<std::size_t>& allocation, Role role,
                                   int part);

struct TraceRow {
  std::size_t pull_index = 0;
  std::size_t session_index = 0;
  std::string session_id;
  std::string group;
  Role role = Role::Clinician;
  int part = 1;
  char arm = 'A';
  double reward = 0.0;
  double expected_reward = 0.0;
  double cumulative_regret = 0.0;  // within the (part, role) instance
};

struct SimulationTrace {
  std::vector<TraceRow> rows;
  std::vector<std::string> session_ids;

  // Final cumulative regret per instance.
  std::map<BanditKey, double> final_regret() const;
  void write_csv(std::ostream& out) const;
};

// Drives the service end to end: every session is started, walked step by
// step and rated by a virtual rater drawn from the population. `first` and
// `count` run a slice of the allocation, so a run can be split around a
// restart.
SimulationTrace run_simulation(const Population& population, std::size_t n_sessions, std::uint64_t seed,
                               SurveyClient& client, std::size_t first = 0,
                               std::optional<std::size_t> count = std::nullopt);

struct RewardSource {
  std::vector<double> true_means;
  std::function<double(std::size_t arm, std::uint64_t pull)> draw;
};

RewardSource bernoulli_source(std::vector<double> means, std::uint64_t seed);
RewardSource profile_source(const RaterProfile& profile, const ArmCatalog& catalog, std::uint64_t seed);

struct BanditTrial {
  std::vector<std::size_t> arms;
  std::vector<double> rewards;
  std::vector<double> cumulative_regret;  // pseudo-regret from the true means
  BanditState final_state;

  double share_of(std::size_t arm, std::size_t from, std::size_t to) const;
};

// Bandit loop without the service.
BanditTrial run_bandit_trial(const ArmCatalog& catalog, const RewardSource& source, std::size_t n_pulls);

}  // namespace trustdss
