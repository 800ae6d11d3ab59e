#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/bandit.hpp"
#include "trustdss/event_log.hpp"
#include "trustdss/evidence.hpp"
#include "trustdss/responses.hpp"

namespace trustdss {

inline constexpr int kApiSchemaVersion = 1;
inline constexpr std::size_t kPatientsPerSession = 4;
inline constexpr std::int64_t kAbandonAfterMs = 24LL * 60 * 60 * 1000;

enum class StepType { Evidence, ConfidencePrompt, PartTransition };
std::string_view to_string(StepType type);

struct PlannedStep {
  StepType type = StepType::Evidence;
  int part = 1;
  std::optional<EvidenceKind> evidence;
  std::optional<std::size_t> patient_index;
  RatingKind expects = RatingKind::None;
};

// The full, fixed walk for one session: Part 1 evidence (each rated for
// usefulness) then a sequence confidence prompt, a part transition, then for
// every patient the Part 2 evidence followed by a confidence prompt.
std::vector<PlannedStep> plan_session_steps(char part1_arm, char part2_arm,
                                            std::size_t patients = kPatientsPerSession);

enum class SessionStatus { InProgress, Complete, Abandoned };
std::string_view to_string(SessionStatus status);

struct RatingRecord {
  std::size_t step_ref = 0;
  RatingKind kind = RatingKind::Confidence;
  int rating = 1;
  std::int64_t timestamp_ms = 0;
};

struct SessionRecord {
  std::string id;
  Role role = Role::Clinician;
  char part1_arm = 'A';
  char part2_arm = 'A';
  std::vector<PlannedStep> plan;
  std::size_t cursor = 0;               // next step to serve
  std::optional<std::size_t> pending;   // served step awaiting its rating
  std::vector<RatingRecord> ratings;
  SessionStatus status = SessionStatus::InProgress;
  std::int64_t started_ms = 0;
  std::int64_t last_activity_ms = 0;
  std::optional<double> part1_reward;
  std::optional<double> part2_reward;

  nlohmann::json to_json() const;
};

struct ServiceConfig {
  std::optional<std::filesystem::path> data_dir;  // memory-only when empty
  std::uint64_t seed = 1;
  Clock clock = system_clock();
  std::int64_t abandon_after_ms = kAbandonAfterMs;
  // Replay only: nothing is written and every state change is refused.
  bool read_only = false;
};

struct SessionStart {
  std::string session_id;
  Role role = Role::Clinician;
  char part1_arm = 'A';
  char part2_arm = 'A';
};

struct RatingAck {
  std::string session_id;
  std::size_t step_ref = 0;
  SessionStatus status = SessionStatus::InProgress;
  std::optional<double> bandit_reward;  // set when this rating credited an arm
  std::optional<int> bandit_part;
};

// Session orchestrator. Every state change is first appended to the event
// log and then applied; on construction the existing log is replayed, which
// restores sessions and bandit state exactly. Without a bundle, steps carry
// no evidence payload (enough for replay, export and reports).
class SurveyService {
 public:
  explicit SurveyService(ServiceConfig config, std::shared_ptr<const EvidenceBundle> bundle = nullptr);

  SessionStart start_session(Role role);
  // Step document, part transition marker or completion marker.
  nlohmann::json next_step(const std::string& session_id);
  RatingAck submit_rating(const std::string& session_id, RatingKind kind, int rating, std::size_t step_ref);

  SessionRecord session(const std::string& session_id) const;
  std::size_t session_count() const;
  // Marks in-progress sessions idle for longer than the limit as abandoned.
  std::size_t sweep_abandoned();

  ResponseTable export_responses(const ResponseFilter& filter = {}) const;
  std::map<BanditKey, BanditState> bandit_state() const { return bandit_.snapshot_all(); }
  nlohmann::json bandit_snapshot_json() const { return bandit_.to_json(); }
  std::size_t event_count() const { return log_.size(); }
  bool has_bundle() const { return bundle_ != nullptr; }

 private:
  void commit(const nlohmann::json& event);  // log, then apply
  void apply(const nlohmann::json& event);
  SessionRecord& find(const std::string& session_id);
  void check_not_abandoned(SessionRecord& s);
  std::string next_session_id();
  void write_snapshot();
  nlohmann::json step_document(const SessionRecord& s, std::size_t step_ref) const;

  ServiceConfig config_;
  std::shared_ptr<const EvidenceBundle> bundle_;
  EventLog log_;
  BanditRegistry bandit_;
  mutable std::mutex mutex_;
  std::map<std::string, SessionRecord> sessions_;
  std::vector<std::string> order_;  // session ids in start order
  std::uint64_t id_counter_ = 0;
};

}  // namespace trustdss
