#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

#include "trustdss/survey_service.hpp"

namespace trustdss {

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

using QueryParams = std::map<std::string, std::string>;

// Transport-independent HTTP+JSON routes:
//   GET  /                              health and service metadata
//   POST /api/sessions                  {role}
//   GET  /api/sessions/{id}             session record
//   GET  /api/sessions/{id}/next        next step document
//   POST /api/sessions/{id}/ratings     {kind, rating, step_ref}
//   GET  /api/report?role=&part=&format=json|csv
//   GET  /api/export.csv?role=&part=
//   GET  /api/bandit                    bandit snapshot
// Errors are {"schema_version":1,"error":{"code":...,"message":...}}.
class ApiHandlers {
 public:
  explicit ApiHandlers(SurveyService& service, nlohmann::json metadata = nlohmann::json::object());

  ApiResponse handle(std::string_view method, std::string_view path, const QueryParams& query,
                     std::string_view body) const;

 private:
  ApiResponse route(std::string_view method, std::string_view path, const QueryParams& query,
                    std::string_view body) const;

  SurveyService& service_;
  nlohmann::json metadata_;
};

// Splits "path?a=1&b=2" into a path and decoded parameters.
std::pair<std::string, QueryParams> split_target(std::string_view target);

// cpp-httplib server around ApiHandlers.
class HttpServer {
 public:
  explicit HttpServer(const ApiHandlers& handlers);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port. Throws
  // ServiceError if the port is taken.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

// Client side of the API. Error responses are raised as NotFoundError (404),
// StateError (409/410, carrying the error code), std::invalid_argument (400)
// or ServiceError (everything else, including an unreachable service).
class SurveyClient {
 public:
  virtual ~SurveyClient() = default;

  nlohmann::json health();
  nlohmann::json start_session(Role role);
  nlohmann::json next_step(const std::string& session_id);
  nlohmann::json submit_rating(const std::string& session_id, RatingKind kind, int rating, std::size_t step_ref);
  nlohmann::json report(const ResponseFilter& filter = {});
  std::string export_csv(const ResponseFilter& filter = {});

 protected:
  virtual ApiResponse request(std::string_view method, const std::string& target, const std::string& body) = 0;

 private:
  ApiResponse checked(std::string_view method, const std::string& target, const std::string& body = "");
};

class EmbeddedClient : public SurveyClient {
 public:
  explicit EmbeddedClient(const ApiHandlers& handlers) : handlers_(handlers) {}

 protected:
  ApiResponse request(std::string_view method, const std::string& target, const std::string& body) override;

 private:
  const ApiHandlers& handlers_;
};

class HttpClient : public SurveyClient {
 public:
  HttpClient(std::string host, int port);
  ~HttpClient() override;

 protected:
  ApiResponse request(std::string_view method, const std::string& target, const std::string& body) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_;
};

}  // namespace trustdss
