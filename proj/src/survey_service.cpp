#include "trustdss/survey_service.hpp"

#include <cstdio>
#include <numeric>

#include "trustdss/error.hpp"
#include "trustdss/random.hpp"

namespace trustdss {

namespace {

constexpr std::uint64_t kSessionIdTag = 0x5e55;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string arm_string(char arm) { return std::string(1, arm); }

char arm_from_json(const nlohmann::json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw DataError("bad arm id '" + s + "'");
  return s[0];
}

std::string prompt_for(Role role, const PlannedStep& step) {
  const bool clinician = role == Role::Clinician;
  switch (step.type) {
    case StepType::Evidence:
      if (step.expects == RatingKind::Usefulness) {
        return clinician ? "How useful is this piece of evidence to you? (1-5)"
                         : "How useful would this piece of evidence be to the average clinician? (1-5)";
      }
      return "";
    case StepType::ConfidencePrompt:
      if (step.part == 1) {
        return clinician ? "How confident are you in the model's predictions after seeing this evidence? (1-5)"
                         : "Would this evidence increase the average clinician's trust in the model's predictions? (1-5)";
      }
      return clinician ? "How confident are you in the model's prediction for this patient? (1-5)"
                       : "How confident would the average clinician be in the model's prediction for this patient? (1-5)";
    case StepType::PartTransition:
      return "Part 1 is complete. Part 2 walks through individual patient scenarios.";
  }
  return "";
}

}  // namespace

std::string_view to_string(StepType type) {
  switch (type) {
    case StepType::Evidence: return "evidence";
    case StepType::ConfidencePrompt: return "confidence_prompt";
    case StepType::PartTransition: return "part_transition";
  }
  return "evidence";
}

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::InProgress: return "in_progress";
    case SessionStatus::Complete: return "complete";
    case SessionStatus::Abandoned: return "abandoned";
  }
  return "in_progress";
}

std::vector<PlannedStep> plan_session_steps(char part1_arm, char part2_arm, std::size_t patients) {
  std::vector<PlannedStep> plan;
  for (auto k : catalog_for_part(1).arm(part1_arm).evidence) {
    plan.push_back({StepType::Evidence, 1, k, std::nullopt, RatingKind::Usefulness});
  }
  plan.push_back({StepType::ConfidencePrompt, 1, std::nullopt, std::nullopt, RatingKind::Confidence});
  plan.push_back({StepType::PartTransition, 2, std::nullopt, std::nullopt, RatingKind::None});
  const auto& part2 = catalog_for_part(2).arm(part2_arm).evidence;
  for (std::size_t p = 0; p < patients; ++p) {
    for (auto k : part2) plan.push_back({StepType::Evidence, 2, k, p, RatingKind::None});
    plan.push_back({StepType::ConfidencePrompt, 2, std::nullopt, p, RatingKind::Confidence});
  }
  return plan;
}

nlohmann::json SessionRecord::to_json() const {
  nlohmann::json ratings_json = nlohmann::json::array();
  for (const auto& r : ratings) {
    ratings_json.push_back(
        {{"step_ref", r.step_ref}, {"kind", to_string(r.kind)}, {"rating", r.rating}, {"timestamp_ms", r.timestamp_ms}});
  }
  nlohmann::json j = {{"schema_version", kApiSchemaVersion},
                      {"session_id", id},
                      {"role", to_string(role)},
                      {"part1_arm", arm_string(part1_arm)},
                      {"part2_arm", arm_string(part2_arm)},
                      {"status", to_string(status)},
                      {"cursor", cursor},
                      {"total_steps", plan.size()},
                      {"pending_step_ref", pending ? nlohmann::json(*pending) : nlohmann::json(nullptr)},
                      {"ratings", ratings_json},
                      {"started_ms", started_ms},
                      {"last_activity_ms", last_activity_ms}};
  j["part1_reward"] = part1_reward ? nlohmann::json(*part1_reward) : nlohmann::json(nullptr);
  j["part2_reward"] = part2_reward ? nlohmann::json(*part2_reward) : nlohmann::json(nullptr);
  return j;
}

SurveyService::SurveyService(ServiceConfig config, std::shared_ptr<const EvidenceBundle> bundle)
    : config_(std::move(config)), bundle_(std::move(bundle)) {
  if (!config_.clock) config_.clock = system_clock();
  if (bundle_) {
    for (auto k : kAllEvidenceKinds) {
      if (!bundle_->has(k)) throw DataError("evidence bundle has no " + std::string(to_string(k)) + " item");
    }
    if (bundle_->patient_count() < kPatientsPerSession) {
      throw DataError("evidence bundle has " + std::to_string(bundle_->patient_count()) + " patient scenarios, need " +
                      std::to_string(kPatientsPerSession));
    }
  }
  if (config_.data_dir) {
    std::filesystem::create_directories(*config_.data_dir);
    log_.set_path(*config_.data_dir / "events.jsonl");
    const auto events = log_.read_existing(!config_.read_only);
    std::size_t n = 0;
    for (const auto& e : events) {
      ++n;
      try {
        apply(e);
      } catch (const StateError& err) {
        throw DataError("event " + std::to_string(n) + " does not replay: " + err.what());
      } catch (const nlohmann::json::exception& err) {
        throw DataError("event " + std::to_string(n) + " is malformed: " + err.what());
      } catch (const std::invalid_argument& err) {
        throw DataError("event " + std::to_string(n) + " is malformed: " + err.what());
      }
    }
    if (!config_.read_only) write_snapshot();
  }
}

void SurveyService::write_snapshot() {
  if (!config_.data_dir) return;
  write_file_atomic(*config_.data_dir / "bandit_snapshot.json", bandit_.to_json().dump(2) + "\n");
}

void SurveyService::commit(const nlohmann::json& event) {
  if (config_.read_only) throw ServiceError("the service was opened read-only");
  log_.append(event);
  apply(event);
  if (event.at("type") == "bandit_pull") write_snapshot();
}

SessionRecord& SurveyService::find(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown session " + session_id);
  return it->second;
}

void SurveyService::apply(const nlohmann::json& e) {
  const auto type = e.at("type").get<std::string>();
  const auto ts = e.at("ts").get<std::int64_t>();

  if (type == "bandit_pull") {
    const int part = e.at("part").get<int>();
    const BanditKey key{part, role_from_string(e.at("role").get<std::string>())};
    const char arm = arm_from_json(e.at("arm"));
    const Reward reward(e.at("reward").get<double>());
    bandit_.record(key, arm, reward);
    if (auto it = sessions_.find(e.at("session_id").get<std::string>()); it != sessions_.end()) {
      (part == 1 ? it->second.part1_reward : it->second.part2_reward) = reward.value();
    }
    return;
  }

  const auto id = e.at("session_id").get<std::string>();
  if (type == "session_started") {
    if (sessions_.count(id)) throw StateError("duplicate_session", "session " + id + " already exists");
    SessionRecord s;
    s.id = id;
    s.role = role_from_string(e.at("role").get<std::string>());
    s.part1_arm = arm_from_json(e.at("part1_arm"));
    s.part2_arm = arm_from_json(e.at("part2_arm"));
    s.plan = plan_session_steps(s.part1_arm, s.part2_arm);
    s.started_ms = s.last_activity_ms = ts;
    sessions_.emplace(id, std::move(s));
    order_.push_back(id);
    ++id_counter_;
    return;
  }

  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw StateError("unknown_session", "event refers to unknown session " + id);
  SessionRecord& s = it->second;

  if (type == "step_served") {
    const auto ref = e.at("step_ref").get<std::size_t>();
    if (s.status != SessionStatus::InProgress) throw StateError("session_closed", "session is not in progress");
    if (s.pending) throw StateError("rating_pending", "a rating is still pending");
    if (ref != s.cursor || ref >= s.plan.size()) throw StateError("out_of_order", "step served out of order");
    if (s.plan[ref].expects != RatingKind::None) s.pending = ref;
    ++s.cursor;
    s.last_activity_ms = ts;
  } else if (type == "rating") {
    const auto ref = e.at("step_ref").get<std::size_t>();
    const auto kind = rating_kind_from_string(e.at("kind").get<std::string>());
    const int rating = e.at("rating").get<int>();
    if (rating < 1 || rating > 5) throw StateError("invalid_rating", "rating out of range");
    if (s.pending != ref) throw StateError("no_pending_step", "no rating is pending for this step");
    if (s.plan[ref].expects != kind) throw StateError("rating_kind_mismatch", "rating kind does not match the step");
    s.ratings.push_back({ref, kind, rating, ts});
    s.pending.reset();
    s.last_activity_ms = ts;
  } else if (type == "session_completed") {
    s.status = SessionStatus::Complete;
  } else if (type == "session_abandoned") {
    if (s.status != SessionStatus::InProgress) throw StateError("session_closed", "session is not in progress");
    s.status = SessionStatus::Abandoned;
  } else {
    throw StateError("unknown_event", "unknown event type " + type);
  }
}

std::string SurveyService::next_session_id() {
  const std::uint64_t base = derive_seed(config_.seed, {kSessionIdTag});
  for (;;) {
    std::string id = hex16(mix64(base + id_counter_));
    if (!sessions_.count(id)) return id;
    ++id_counter_;
  }
}

void SurveyService::check_not_abandoned(SessionRecord& s) {
  if (s.status == SessionStatus::InProgress && config_.clock() - s.last_activity_ms > config_.abandon_after_ms) {
    commit({{"type", "session_abandoned"}, {"ts", config_.clock()}, {"session_id", s.id}});
  }
  if (s.status == SessionStatus::Abandoned) {
    throw StateError("session_abandoned", "session " + s.id + " was abandoned after inactivity");
  }
}

std::size_t SurveyService::sweep_abandoned() {
  std::lock_guard lock(mutex_);
  const auto now = config_.clock();
  std::size_t n = 0;
  for (const auto& id : order_) {
    const auto& s = sessions_.at(id);
    if (s.status == SessionStatus::InProgress && now - s.last_activity_ms > config_.abandon_after_ms) {
      commit({{"type", "session_abandoned"}, {"ts", now}, {"session_id", id}});
      ++n;
    }
  }
  return n;
}

SessionStart SurveyService::start_session(Role role) {
  if (!config_.read_only) sweep_abandoned();
  std::lock_guard lock(mutex_);
  const char a1 = bandit_.select({1, role});
  const char a2 = bandit_.select({2, role});
  const std::string id = next_session_id();
  commit({{"type", "session_started"},
          {"ts", config_.clock()},
          {"session_id", id},
          {"role", to_string(role)},
          {"part1_arm", arm_string(a1)},
          {"part2_arm", arm_string(a2)}});
  return {id, role, a1, a2};
}

nlohmann::json SurveyService::step_document(const SessionRecord& s, std::size_t ref) const {
  const auto& step = s.plan[ref];
  nlohmann::json doc = {{"schema_version", kApiSchemaVersion},
                        {"session_id", s.id},
                        {"type", to_string(step.type)},
                        {"step_ref", ref},
                        {"part", step.part},
                        {"arm", arm_string(step.part == 1 ? s.part1_arm : s.part2_arm)},
                        {"expected_rating", to_string(step.expects)},
                        {"prompt", prompt_for(s.role, step)},
                        {"progress", {{"current", ref + 1}, {"total", s.plan.size()}}}};
  doc["patient_index"] = step.patient_index ? nlohmann::json(*step.patient_index) : nlohmann::json(nullptr);
  if (step.evidence) {
    doc["evidence_kind"] = to_string(*step.evidence);
    doc["display_title"] = display_title(*step.evidence);
    doc["payload"] = bundle_ ? bundle_->step_payload(*step.evidence, step.patient_index) : nlohmann::json(nullptr);
  } else {
    doc["evidence_kind"] = nullptr;
    doc["payload"] = nullptr;
  }
  if (step.type == StepType::ConfidencePrompt) {
    nlohmann::json shown = nlohmann::json::array();
    const char arm = step.part == 1 ? s.part1_arm : s.part2_arm;
    for (auto k : catalog_for_part(step.part).arm(arm).evidence) shown.push_back(to_string(k));
    doc["shown_evidence"] = shown;
  }
  return doc;
}

nlohmann::json SurveyService::next_step(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  SessionRecord& s = find(session_id);
  check_not_abandoned(s);
  if (s.status == SessionStatus::Complete || s.cursor == s.plan.size()) {
    if (s.pending) throw StateError("rating_pending", "the rating for step " + std::to_string(*s.pending) + " is pending");
    return {{"schema_version", kApiSchemaVersion},
            {"session_id", s.id},
            {"type", "completion"},
            {"status", to_string(s.status)},
            {"progress", {{"current", s.plan.size()}, {"total", s.plan.size()}}}};
  }
  if (s.pending) {
    throw StateError("rating_pending", "the rating for step " + std::to_string(*s.pending) + " is pending");
  }
  const std::size_t ref = s.cursor;
  auto doc = step_document(s, ref);
  commit({{"type", "step_served"}, {"ts", config_.clock()}, {"session_id", s.id}, {"step_ref", ref}});
  return doc;
}

RatingAck SurveyService::submit_rating(const std::string& session_id, RatingKind kind, int rating,
                                       std::size_t step_ref) {
  if (rating < 1 || rating > 5) throw std::invalid_argument("rating must be an integer from 1 to 5");
  if (kind == RatingKind::None) throw std::invalid_argument("rating kind must be usefulness or confidence");

  std::lock_guard lock(mutex_);
  SessionRecord& s = find(session_id);
  check_not_abandoned(s);
  for (const auto& r : s.ratings) {
    if (r.step_ref == step_ref) {
      throw StateError("duplicate_rating", "step " + std::to_string(step_ref) + " was already rated " +
                                               std::to_string(r.rating));
    }
  }
  if (!s.pending || *s.pending != step_ref) {
    throw StateError("no_pending_step", "step " + std::to_string(step_ref) + " is not awaiting a rating");
  }
  const auto& step = s.plan[step_ref];
  if (step.expects != kind) {
    throw StateError("rating_kind_mismatch", "step " + std::to_string(step_ref) + " expects a " +
                                                 std::string(to_string(step.expects)) + " rating");
  }

  commit({{"type", "rating"},
          {"ts", config_.clock()},
          {"session_id", s.id},
          {"step_ref", step_ref},
          {"kind", to_string(kind)},
          {"rating", rating}});

  RatingAck ack{s.id, step_ref, s.status, std::nullopt, std::nullopt};
  if (step.type == StepType::ConfidencePrompt) {
    std::optional<Reward> reward;
    if (step.part == 1) {
      reward = normalize_rating(rating);
    } else if (step.patient_index && *step.patient_index + 1 == kPatientsPerSession) {
      int sum = 0;
      int count = 0;
      for (const auto& r : s.ratings) {
        const auto& st = s.plan[r.step_ref];
        if (st.part == 2 && st.type == StepType::ConfidencePrompt) {
          sum += r.rating;
          ++count;
        }
      }
      if (count != static_cast<int>(kPatientsPerSession)) throw StateError("incomplete", "patient ratings missing");
      reward = normalize_mean_rating(static_cast<double>(sum) / count);
    }
    if (reward) {
      const char arm = step.part == 1 ? s.part1_arm : s.part2_arm;
      commit({{"type", "bandit_pull"},
              {"ts", config_.clock()},
              {"part", step.part},
              {"role", to_string(s.role)},
              {"arm", arm_string(arm)},
              {"reward", reward->value()},
              {"session_id", s.id}});
      ack.bandit_reward = reward->value();
      ack.bandit_part = step.part;
    }
  }
  if (step_ref + 1 == s.plan.size()) {
    commit({{"type", "session_completed"}, {"ts", config_.clock()}, {"session_id", s.id}});
  }
  ack.status = s.status;
  return ack;
}

SessionRecord SurveyService::session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown session " + session_id);
  return it->second;
}

std::size_t SurveyService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

ResponseTable SurveyService::export_responses(const ResponseFilter& filter) const {
  std::lock_guard lock(mutex_);
  ResponseTable table;
  for (const auto& id : order_) {
    const auto& s = sessions_.at(id);
    for (const auto& r : s.ratings) {
      const auto& step = s.plan[r.step_ref];
      ResponseRow row{s.id,
                      s.role,
                      step.part,
                      step.part == 1 ? s.part1_arm : s.part2_arm,
                      step.evidence,
                      r.kind,
                      step.patient_index,
                      r.rating,
                      r.timestamp_ms};
      if (filter.accepts(row)) table.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace trustdss
