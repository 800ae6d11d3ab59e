#include "trustdss/responses.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "trustdss/cohort.hpp"
#include "trustdss/error.hpp"

namespace trustdss {

std::string_view to_string(RatingKind kind) {
  switch (kind) {
    case RatingKind::Usefulness: return "usefulness";
    case RatingKind::Confidence: return "confidence";
    case RatingKind::None: return "none";
  }
  return "none";
}

RatingKind rating_kind_from_string(std::string_view s) {
  if (s == "usefulness") return RatingKind::Usefulness;
  if (s == "confidence") return RatingKind::Confidence;
  if (s == "none") return RatingKind::None;
  throw std::invalid_argument("unknown rating kind: " + std::string(s));
}

void write_response_csv(std::ostream& out, const ResponseTable& table) {
  out << kResponseCsvHeader << '\n';
  for (const auto& r : table) {
    out << r.session_id << ',' << to_string(r.role) << ',' << r.part << ',' << r.arm << ',';
    if (r.evidence_kind) out << to_string(*r.evidence_kind);
    out << ',' << to_string(r.rating_kind) << ',';
    if (r.patient_index) out << *r.patient_index;
    out << ',' << r.rating << ',' << format_double(r.normalized()) << ',' << r.timestamp_ms << '\n';
  }
}

namespace {

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

ResponseTable read_response_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("response table is empty (no header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResponseCsvHeader) throw DataError("response table header does not match");

  ResponseTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw DataError("response table line " + std::to_string(line_no) + ": expected 10 fields");
    try {
      ResponseRow r;
      r.session_id = f[0];
      r.role = role_from_string(f[1]);
      r.part = parse_number<int>(f[2]);
      if (f[3].size() != 1) throw std::invalid_argument("bad arm");
      r.arm = f[3][0];
      if (!f[4].empty()) r.evidence_kind = evidence_kind_from_string(f[4]);
      r.rating_kind = rating_kind_from_string(f[5]);
      if (!f[6].empty()) r.patient_index = parse_number<std::size_t>(f[6]);
      r.rating = parse_number<int>(f[7]);
      if (r.rating < 1 || r.rating > 5) throw std::invalid_argument("rating out of range");
      r.timestamp_ms = parse_number<std::int64_t>(f[9]);
      table.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw DataError("response table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

}  // namespace trustdss
