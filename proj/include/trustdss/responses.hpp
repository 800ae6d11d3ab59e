#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustdss/bandit.hpp"
#include "trustdss/evidence_kind.hpp"

namespace trustdss {

enum class RatingKind { Usefulness, Confidence, None };
std::string_view to_string(RatingKind kind);
RatingKind rating_kind_from_string(std::string_view s);

// One collected rating, as exported. Usefulness rows name the evidence kind;
// confidence rows leave it empty. Part 2 rows carry the patient index.
struct ResponseRow {
  std::string session_id;
  Role role = Role::Clinician;
  int part = 1;
  char arm = 'A';
  std::optional<EvidenceKind> evidence_kind;
  RatingKind rating_kind = RatingKind::Confidence;
  std::optional<std::size_t> patient_index;
  int rating = 1;
  std::int64_t timestamp_ms = 0;

  double normalized() const { return (rating - 1) / 4.0; }
  bool operator==(const ResponseRow&) const = default;
};

using ResponseTable = std::vector<ResponseRow>;

struct ResponseFilter {
  std::optional<Role> role;
  std::optional<int> part;

  bool accepts(const ResponseRow& row) const {
    return (!role || row.role == *role) && (!part || row.part == *part);
  }
};

inline constexpr std::string_view kResponseCsvHeader =
    "session_id,role,part,arm,evidence_kind,rating_kind,patient_index,rating,normalized,timestamp_ms";

void write_response_csv(std::ostream& out, const ResponseTable& table);
// Throws DataError on a malformed table.
ResponseTable read_response_csv(std::istream& in);

}  // namespace trustdss
