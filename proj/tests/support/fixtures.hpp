#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "trustdss/evidence.hpp"
#include "trustdss/event_log.hpp"
#include "trustdss/pipeline.hpp"

namespace fixture {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("trustdss_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Manually advanced clock shared by copies.
struct ManualClock {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1'700'000'000'000);
  trustdss::Clock clock() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(std::int64_t ms) const { *now += ms; }
};

inline trustdss::PipelineConfig small_pipeline_config() {
  trustdss::PipelineConfig c;
  c.seed = 11;
  c.n_patients = 4000;
  c.training.epochs = 30;
  c.training.n_folds = 2;
  c.training.patience = 10;
  return c;
}

// A real but small bundle, built once per process.
inline std::shared_ptr<const trustdss::EvidenceBundle> small_bundle() {
  static std::shared_ptr<const trustdss::EvidenceBundle> cached = [] {
    TempDir dir("bundle");
    trustdss::run_build(small_pipeline_config(), dir.path());
    return std::make_shared<const trustdss::EvidenceBundle>(trustdss::EvidenceBundle::load(dir.path()));
  }();
  return cached;
}

}  // namespace fixture
