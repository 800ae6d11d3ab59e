#pragma once

#include <stdexcept>
#include <string>

namespace trustdss {

// Malformed or inconsistent input data (CSV, JSON bundles, cohorts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A request that is valid in form but not allowed in the current state,
// e.g. submitting a rating twice or asking for the next step while a
// rating is still pending.
class StateError : public std::runtime_error {
 public:
  StateError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Persistence or transport failure.
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trustdss
