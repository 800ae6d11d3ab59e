#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/evidence_kind.hpp"

namespace trustdss {

enum class Role { Clinician, MlExpert };
inline constexpr std::array<Role, 2> kAllRoles = {Role::Clinician, Role::MlExpert};
std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct Arm {
  char id = 'A';
  std::vector<EvidenceKind> evidence;  // presentation order
};

struct ArmCatalog {
  int part = 1;
  std::vector<Arm> arms;

  std::size_t index_of(char arm_id) const;  // throws std::invalid_argument
  const Arm& arm(char arm_id) const { return arms[index_of(arm_id)]; }
  nlohmann::json to_json() const;
};

// Part 1: eight general-evidence sequences over Data, Methodology, Accuracy
// and the stratified surrogates. Part 2: six per-patient sequences.
ArmCatalog part1_catalog();
ArmCatalog part2_catalog();
std::pair<ArmCatalog, ArmCatalog> build_catalogs();
const ArmCatalog& catalog_for_part(int part);

// A rating on the 1-5 scale mapped to [0, 1].
class Reward {
 public:
  explicit Reward(double value);  // throws std::invalid_argument outside [0, 1]
  double value() const { return value_; }

 private:
  double value_;
};

Reward normalize_rating(int rating);
// Mean of several 1-5 ratings mapped to [0, 1].
Reward normalize_mean_rating(double mean_rating);

struct ArmStats {
  std::uint64_t pulls = 0;
  double reward_sum = 0.0;

  double mean() const { return pulls ? reward_sum / static_cast<double>(pulls) : 0.0; }
  bool operator==(const ArmStats&) const = default;
};

struct BanditState {
  std::vector<ArmStats> arms;
  std::uint64_t total_pulls = 0;

  static BanditState fresh(const ArmCatalog& catalog);
  bool operator==(const BanditState&) const = default;
  nlohmann::json to_json() const;
  static BanditState from_json(const nlohmann::json& j);
};

// Classical UCB1: any unpulled arm first (catalog order); otherwise the arm
// maximizing mean + sqrt(2 ln n / n_j), lowest index on ties.
std::size_t select_arm(const BanditState& state, const ArmCatalog& catalog);

// Returns the updated state; the input is untouched.
BanditState record_reward(const BanditState& state, const ArmCatalog& catalog, char arm_id, Reward reward);

struct ArmBound {
  char arm_id = 'A';
  std::uint64_t pulls = 0;
  double mean = 0.0;
  std::optional<double> upper_bound;  // absent while the arm is unpulled
};

std::vector<ArmBound> ucb_bounds(const BanditState& state, const ArmCatalog& catalog);

double ucb_value(double mean, std::uint64_t arm_pulls, std::uint64_t total_pulls);

struct BanditKey {
  int part = 1;
  Role role = Role::Clinician;
  auto operator<=>(const BanditKey&) const = default;
};

// One bandit instance per (part, role). All operations take the registry
// lock, so selections see a consistent snapshot and updates are atomic.
class BanditRegistry {
 public:
  BanditRegistry();

  char select(BanditKey key) const;
  void record(BanditKey key, char arm_id, Reward reward);

  BanditState snapshot(BanditKey key) const;
  std::map<BanditKey, BanditState> snapshot_all() const;

  nlohmann::json to_json() const;

 private:
  mutable std::mutex mutex_;
  std::map<BanditKey, BanditState> states_;
};

}  // namespace trustdss
