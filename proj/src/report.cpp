#include "trustdss/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "trustdss/cohort.hpp"

namespace trustdss {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string csv_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

nlohmann::json stats_json(const MeanWithCi& s) {
  return {{"n", s.n}, {"mean", opt(s.mean)}, {"std", opt(s.std_dev)}, {"ci_low", opt(s.ci_low)}, {"ci_high", opt(s.ci_high)}};
}

std::vector<Role> roles_for(const ResponseFilter& f) {
  if (f.role) return {*f.role};
  return {kAllRoles.begin(), kAllRoles.end()};
}

std::vector<int> parts_for(const ResponseFilter& f) {
  if (f.part) return {*f.part};
  return {1, 2};
}

}  // namespace

MeanWithCi mean_with_ci(const std::vector<double>& values) {
  MeanWithCi s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  s.mean = mean;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  const double half = kCiZ * sd / std::sqrt(static_cast<double>(values.size()));
  s.std_dev = sd;
  s.ci_low = std::max(0.0, mean - half);
  s.ci_high = std::min(1.0, mean + half);
  return s;
}

ArmReport build_report(const ResponseTable& table, const ResponseFilter& filter, std::size_t patients_per_session) {
  ArmReport report;
  report.filter = filter;

  std::set<std::string> sessions;
  std::map<std::pair<int, Role>, std::map<char, ArmReportRow>> arms;
  std::map<std::pair<Role, EvidenceKind>, std::vector<double>> usefulness;
  std::map<std::pair<Role, std::size_t>, std::vector<double>> patient_conf;

  struct Part2Session {
    Role role;
    char arm;
    int sum = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Part2Session> part2;

  auto credit = [&](int part, Role role, char arm, double reward) {
    auto& row = arms[{part, role}][arm];
    row.pulls += 1;
    row.reward_sum += reward;
  };

  for (const auto& r : table) {
    if (!filter.accepts(r)) continue;
    ++report.n_ratings;
    sessions.insert(r.session_id);
    if (r.rating_kind == RatingKind::Usefulness && r.evidence_kind) {
      usefulness[{r.role, *r.evidence_kind}].push_back(r.normalized());
    } else if (r.rating_kind == RatingKind::Confidence) {
      if (r.part == 1) {
        credit(1, r.role, r.arm, normalize_rating(r.rating).value());
      } else if (r.patient_index) {
        patient_conf[{r.role, *r.patient_index}].push_back(r.normalized());
        auto& p = part2.try_emplace(r.session_id, Part2Session{r.role, r.arm}).first->second;
        p.sum += r.rating;
        ++p.count;
      }
    }
  }
  for (const auto& [id, p] : part2) {
    if (p.count == patients_per_session) {
      credit(2, p.role, p.arm, normalize_mean_rating(static_cast<double>(p.sum) / static_cast<double>(p.count)).value());
    }
  }
  report.n_sessions = sessions.size();

  for (int part : parts_for(filter)) {
    for (Role role : roles_for(filter)) {
      const auto& catalog = catalog_for_part(part);
      auto& seen = arms[{part, role}];
      std::uint64_t total = 0;
      for (const auto& [id, row] : seen) total += row.pulls;
      for (const auto& a : catalog.arms) {
        ArmReportRow row;
        row.part = part;
        row.role = role;
        row.arm = a.id;
        if (auto it = seen.find(a.id); it != seen.end()) {
          row.pulls = it->second.pulls;
          row.reward_sum = it->second.reward_sum;
        }
        if (row.pulls > 0) {
          row.mean = row.reward_sum / static_cast<double>(row.pulls);
          row.ucb_upper = ucb_value(row.mean, row.pulls, total);
        }
        report.arms.push_back(row);
      }
    }
  }

  for (Role role : roles_for(filter)) {
    if (!filter.part || *filter.part == 1) {
      for (auto k : catalog_for_part(1).arms.back().evidence) {
        report.evidence.push_back({role, k, mean_with_ci(usefulness[{role, k}])});
      }
    }
    if (!filter.part || *filter.part == 2) {
      for (std::size_t p = 0; p < patients_per_session; ++p) {
        report.patients.push_back({role, p, mean_with_ci(patient_conf[{role, p}])});
      }
    }
  }
  return report;
}

nlohmann::json ArmReport::to_json() const {
  nlohmann::json arms_json = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : catalog_for_part(a.part).arm(a.arm).evidence) kinds.push_back(to_string(k));
    arms_json.push_back({{"part", a.part},
                         {"role", to_string(a.role)},
                         {"arm", std::string(1, a.arm)},
                         {"evidence", kinds},
                         {"pulls", a.pulls},
                         {"mean", a.mean},
                         {"ucb_upper", opt(a.ucb_upper)},
                         {"ucb_error", a.ucb_upper ? nlohmann::json(*a.ucb_upper - a.mean) : nlohmann::json(nullptr)}});
  }
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : evidence) {
    auto j = stats_json(e.stats);
    j["role"] = to_string(e.role);
    j["evidence_kind"] = to_string(e.kind);
    ev.push_back(j);
  }
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : patients) {
    auto j = stats_json(p.stats);
    j["role"] = to_string(p.role);
    j["patient_index"] = p.patient_index;
    pts.push_back(j);
  }
  nlohmann::json f = {{"role", filter.role ? nlohmann::json(to_string(*filter.role)) : nlohmann::json(nullptr)},
                      {"part", filter.part ? nlohmann::json(*filter.part) : nlohmann::json(nullptr)}};
  return {{"schema_version", 1},
          {"format", "trustdss.report"},
          {"filter", f},
          {"n_sessions", n_sessions},
          {"n_ratings", n_ratings},
          {"arms", arms_json},
          {"evidence_usefulness", ev},
          {"patient_confidence", pts}};
}

void ArmReport::write_csv(std::ostream& out) const {
  out << "section,part,role,arm,evidence_kind,patient_index,n,mean,std,lower,upper\n";
  for (const auto& a : arms) {
    out << "arm," << a.part << ',' << to_string(a.role) << ',' << a.arm << ",,," << a.pulls << ','
        << format_double(a.mean) << ",," << format_double(a.mean) << ',' << csv_opt(a.ucb_upper) << '\n';
  }
  for (const auto& e : evidence) {
    out << "evidence,1," << to_string(e.role) << ",," << to_string(e.kind) << ",," << e.stats.n << ','
        << csv_opt(e.stats.mean) << ',' << csv_opt(e.stats.std_dev) << ',' << csv_opt(e.stats.ci_low) << ','
        << csv_opt(e.stats.ci_high) << '\n';
  }
  for (const auto& p : patients) {
    out << "patient,2," << to_string(p.role) << ",,," << p.patient_index << ',' << p.stats.n << ','
        << csv_opt(p.stats.mean) << ',' << csv_opt(p.stats.std_dev) << ',' << csv_opt(p.stats.ci_low) << ','
        << csv_opt(p.stats.ci_high) << '\n';
  }
}

}  // namespace trustdss
