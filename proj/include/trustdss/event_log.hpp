#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

namespace trustdss {

// Milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;
Clock system_clock();

// Append-only JSON-lines log with a single serialized writer. Every append
// is flushed before returning. Without a path the log lives in memory only.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::filesystem::path path) : path_(std::move(path)) {}

  // Points an empty, unopened log at a file.
  void set_path(std::filesystem::path path);

  // Events already on disk, in order. A torn final line (crash during a
  // write) is dropped, and truncated away when `repair` is set; any other
  // malformed line is a DataError.
  std::vector<nlohmann::json> read_existing(bool repair = true);

  // Throws ServiceError if the write fails.
  void append(const nlohmann::json& event);

  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  mutable std::mutex mutex_;
  std::size_t count_ = 0;
};

// Writes `contents` next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace trustdss
