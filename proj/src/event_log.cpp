#include "trustdss/event_log.hpp"

#include <chrono>
#include <sstream>
#include <string>

#include "trustdss/error.hpp"

namespace trustdss {

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

void EventLog::set_path(std::filesystem::path path) {
  std::lock_guard lock(mutex_);
  if (out_.is_open() || count_ != 0) throw ServiceError("event log is already in use");
  path_ = std::move(path);
}

std::vector<nlohmann::json> EventLog::read_existing(bool repair) {
  std::lock_guard lock(mutex_);
  std::vector<nlohmann::json> events;
  if (!path_ || !std::filesystem::exists(*path_)) return events;

  std::ifstream in(*path_, std::ios::binary);
  if (!in) throw ServiceError("cannot read event log " + path_->string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::size_t pos = 0;
  std::size_t good_bytes = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) break;  // torn tail
    const std::string line = text.substr(pos, nl - pos);
    if (!line.empty()) {
      try {
        events.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error&) {
        throw DataError("event log " + path_->string() + " line " + std::to_string(line_no) + " is not valid JSON");
      }
    }
    pos = nl + 1;
    good_bytes = pos;
  }
  in.close();
  if (repair && good_bytes < text.size()) std::filesystem::resize_file(*path_, good_bytes);
  count_ = events.size();
  return events;
}

void EventLog::append(const nlohmann::json& event) {
  std::lock_guard lock(mutex_);
  if (path_) {
    if (!out_.is_open()) {
      if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
      out_.open(*path_, std::ios::binary | std::ios::app);
      if (!out_) throw ServiceError("cannot open event log " + path_->string());
    }
    out_ << event.dump() << '\n';
    out_.flush();
    if (!out_) throw ServiceError("write to event log " + path_->string() + " failed");
  }
  ++count_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return count_;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ServiceError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw ServiceError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ServiceError("cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace trustdss
