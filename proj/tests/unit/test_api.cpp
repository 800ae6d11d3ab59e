#include <doctest.h>

#include "fixtures.hpp"
#include "trustdss/api.hpp"
#include "trustdss/error.hpp"
#include "trustdss/responses.hpp"

using namespace trustdss;

namespace {

ApiResponse call(const ApiHandlers& h, std::string_view method, std::string_view target, std::string_view body = "") {
  const auto [path, query] = split_target(target);
  return h.handle(method, path, query, body);
}

std::string error_code(const ApiResponse& r) { return r.json().at("error").at("code").get<std::string>(); }

}  // namespace

TEST_SUITE("api") {

TEST_CASE("target splitting decodes parameters") {
  const auto [path, q] = split_target("/api/report?role=ml_expert&part=2&x=a%20b+c");
  CHECK(path == "/api/report");
  CHECK(q.at("role") == "ml_expert");
  CHECK(q.at("part") == "2");
  CHECK(q.at("x") == "a b c");
}

TEST_CASE("routes and status codes") {
  fixture::ManualClock clock;
  ServiceConfig cfg;
  cfg.clock = clock.clock();
  SurveyService svc(cfg);
  ApiHandlers h(svc, {{"bundle_dir", "none"}});

  const auto health = call(h, "GET", "/");
  CHECK(health.status == 200);
  CHECK(health.json().at("status") == "ok");
  CHECK(health.json().at("bundle_dir") == "none");

  const auto created = call(h, "POST", "/api/sessions", R"({"role":"clinician"})");
  REQUIRE(created.status == 201);
  const auto id = created.json().at("session_id").get<std::string>();
  CHECK(created.json().at("part1_arm") == "A");

  CHECK(call(h, "POST", "/api/sessions", R"({"role":"nurse"})").status == 400);
  CHECK(call(h, "POST", "/api/sessions", "{not json").status == 400);
  CHECK(call(h, "POST", "/api/sessions", "{}").status == 400);

  const auto step = call(h, "GET", "/api/sessions/" + id + "/next");
  REQUIRE(step.status == 200);
  CHECK(step.json().at("type") == "evidence");

  const auto pending = call(h, "GET", "/api/sessions/" + id + "/next");
  CHECK(pending.status == 409);
  CHECK(error_code(pending) == "rating_pending");

  const std::string ratings = "/api/sessions/" + id + "/ratings";
  CHECK(call(h, "POST", ratings, R"({"kind":"usefulness","rating":6,"step_ref":0})").status == 400);
  CHECK(call(h, "POST", ratings, R"({"kind":"usefulness","rating":3.5,"step_ref":0})").status == 400);
  CHECK(call(h, "POST", ratings, R"({"kind":"usefulness","rating":"3","step_ref":0})").status == 400);
  const auto mismatch = call(h, "POST", ratings, R"({"kind":"confidence","rating":3,"step_ref":0})");
  CHECK(mismatch.status == 409);
  CHECK(error_code(mismatch) == "rating_kind_mismatch");
  const auto ok = call(h, "POST", ratings, R"({"kind":"usefulness","rating":3,"step_ref":0})");
  CHECK(ok.status == 200);
  CHECK(ok.json().at("accepted") == true);
  CHECK_FALSE(ok.json().contains("bandit_update"));
  const auto dup = call(h, "POST", ratings, R"({"kind":"usefulness","rating":3,"step_ref":0})");
  CHECK(dup.status == 409);
  CHECK(error_code(dup) == "duplicate_rating");

  CHECK(call(h, "GET", "/api/sessions/" + id).json().at("cursor") == 1);
  CHECK(call(h, "GET", "/api/sessions/ffffffffffffffff/next").status == 404);
  CHECK(call(h, "GET", "/api/nothing").status == 404);
  CHECK(call(h, "DELETE", "/api/sessions").status == 405);

  const auto report = call(h, "GET", "/api/report?role=clinician&part=1");
  CHECK(report.status == 200);
  CHECK(report.json().at("arms").size() == 8);
  CHECK(call(h, "GET", "/api/report?part=3").status == 400);
  const auto csv_report = call(h, "GET", "/api/report?format=csv");
  CHECK(csv_report.content_type == "text/csv");

  const auto exported = call(h, "GET", "/api/export.csv");
  CHECK(exported.content_type == "text/csv");
  CHECK(exported.body.rfind(std::string(kResponseCsvHeader), 0) == 0);
  CHECK(call(h, "GET", "/api/bandit").json().at("instances").size() == 4);

  clock.advance(kAbandonAfterMs + 1);
  const auto gone = call(h, "GET", "/api/sessions/" + id + "/next");
  CHECK(gone.status == 410);
  CHECK(error_code(gone) == "session_abandoned");
}

TEST_CASE("http server and client on an ephemeral port") {
  fixture::ManualClock clock;
  ServiceConfig cfg;
  cfg.clock = clock.clock();
  SurveyService svc(cfg);
  ApiHandlers h(svc);
  HttpServer server(h);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  server.start();

  HttpClient client("127.0.0.1", port);
  CHECK(client.health().at("service") == "trustdss");
  const auto id = client.start_session(Role::MlExpert).at("session_id").get<std::string>();
  const auto step = client.next_step(id);
  CHECK(step.at("step_ref") == 0);
  try {
    client.next_step(id);
    FAIL("expected a state error");
  } catch (const StateError& e) {
    CHECK(e.code() == "rating_pending");
  }
  CHECK_THROWS_AS(client.next_step("0123456789abcdef"), NotFoundError);
  CHECK_THROWS_AS(client.submit_rating(id, RatingKind::Usefulness, 9, 0), std::invalid_argument);
  client.submit_rating(id, RatingKind::Usefulness, 5, 0);
  const auto rows = client.export_csv();
  CHECK(rows.find(id) != std::string::npos);
  server.stop();

  HttpClient dead("127.0.0.1", port);
  CHECK_THROWS_AS(dead.health(), ServiceError);
}

TEST_CASE("embedded client raises the same errors") {
  ServiceConfig cfg;
  SurveyService svc(cfg);
  ApiHandlers h(svc);
  EmbeddedClient client(h);
  CHECK_THROWS_AS(client.next_step("nope"), NotFoundError);
  const auto id = client.start_session(Role::Clinician).at("session_id").get<std::string>();
  CHECK(client.next_step(id).at("arm") == "A");
}

}
