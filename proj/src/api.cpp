#include "trustdss/api.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include <httplib.h>

#include "trustdss/error.hpp"
#include "trustdss/report.hpp"

namespace trustdss {

namespace {

ApiResponse json_response(int status, const nlohmann::json& j) { return {status, "application/json", j.dump()}; }

ApiResponse error_response(int status, std::string_view code, std::string_view message) {
  return json_response(status, {{"schema_version", kApiSchemaVersion},
                                {"error", {{"code", code}, {"message", message}}}});
}

std::vector<std::string_view> segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    if (path[pos] == '/') {
      ++pos;
      continue;
    }
    const auto end = path.find('/', pos);
    out.push_back(path.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end;
  }
  return out;
}

ResponseFilter filter_from(const QueryParams& q) {
  ResponseFilter f;
  if (auto it = q.find("role"); it != q.end() && !it->second.empty()) f.role = role_from_string(it->second);
  if (auto it = q.find("part"); it != q.end() && !it->second.empty()) {
    if (it->second != "1" && it->second != "2") throw std::invalid_argument("part must be 1 or 2");
    f.part = it->second[0] - '0';
  }
  return f;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size()) {
      int v = 0;
      std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
      out += static_cast<char>(v);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string query_string(const ResponseFilter& f, std::string_view extra = {}) {
  std::string q;
  auto add = [&](std::string_view kv) {
    q += q.empty() ? '?' : '&';
    q += kv;
  };
  if (f.role) add("role=" + std::string(to_string(*f.role)));
  if (f.part) add("part=" + std::to_string(*f.part));
  if (!extra.empty()) add(extra);
  return q;
}

}  // namespace

std::pair<std::string, QueryParams> split_target(std::string_view target) {
  const auto q = target.find('?');
  std::pair<std::string, QueryParams> out{std::string(target.substr(0, q)), {}};
  if (q == std::string_view::npos) return out;
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const auto kv = rest.substr(0, amp);
    const auto eq = kv.find('=');
    if (!kv.empty()) {
      out.second[url_decode(kv.substr(0, eq))] = eq == std::string_view::npos ? "" : url_decode(kv.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return out;
}

ApiHandlers::ApiHandlers(SurveyService& service, nlohmann::json metadata)
    : service_(service), metadata_(std::move(metadata)) {}

ApiResponse ApiHandlers::handle(std::string_view method, std::string_view path, const QueryParams& query,
                                std::string_view body) const {
  try {
    return route(method, path, query, body);
  } catch (const NotFoundError& e) {
    return error_response(404, "not_found", e.what());
  } catch (const StateError& e) {
    return error_response(e.code() == "session_abandoned" ? 410 : 409, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const DataError& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const ServiceError& e) {
    return error_response(503, "storage_failure", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
}

ApiResponse ApiHandlers::route(std::string_view method, std::string_view path, const QueryParams& query,
                               std::string_view body) const {
  const auto seg = segments(path);
  const bool get = method == "GET";
  const bool post = method == "POST";

  if (seg.empty()) {
    if (!get) return error_response(405, "method_not_allowed", "use GET");
    nlohmann::json doc = {{"schema_version", kApiSchemaVersion},
                          {"service", "trustdss"},
                          {"status", "ok"},
                          {"sessions", service_.session_count()},
                          {"events", service_.event_count()},
                          {"bundle_loaded", service_.has_bundle()}};
    for (const auto& [k, v] : metadata_.items()) doc[k] = v;
    return json_response(200, doc);
  }
  if (seg[0] != "api" || seg.size() < 2) return error_response(404, "not_found", "no such route");

  if (seg[1] == "sessions") {
    if (seg.size() == 2) {
      if (!post) return error_response(405, "method_not_allowed", "use POST");
      const auto j = nlohmann::json::parse(body);
      const auto start = service_.start_session(role_from_string(j.at("role").get<std::string>()));
      return json_response(201, {{"schema_version", kApiSchemaVersion},
                                 {"session_id", start.session_id},
                                 {"role", to_string(start.role)},
                                 {"part1_arm", std::string(1, start.part1_arm)},
                                 {"part2_arm", std::string(1, start.part2_arm)}});
    }
    const std::string id(seg[2]);
    if (seg.size() == 3 && get) return json_response(200, service_.session(id).to_json());
    if (seg.size() == 4 && seg[3] == "next" && get) return json_response(200, service_.next_step(id));
    if (seg.size() == 4 && seg[3] == "ratings" && post) {
      const auto j = nlohmann::json::parse(body);
      const auto& r = j.at("rating");
      if (!r.is_number_integer()) throw std::invalid_argument("rating must be an integer from 1 to 5");
      const auto ack = service_.submit_rating(id, rating_kind_from_string(j.at("kind").get<std::string>()),
                                              r.get<int>(), j.at("step_ref").get<std::size_t>());
      nlohmann::json doc = {{"schema_version", kApiSchemaVersion},
                            {"accepted", true},
                            {"session_id", ack.session_id},
                            {"step_ref", ack.step_ref},
                            {"status", to_string(ack.status)}};
      if (ack.bandit_reward) doc["bandit_update"] = {{"part", *ack.bandit_part}, {"reward", *ack.bandit_reward}};
      return json_response(200, doc);
    }
    return error_response(404, "not_found", "no such route");
  }

  if (seg.size() == 2 && get) {
    if (seg[1] == "report") {
      const auto report = build_report(service_.export_responses(), filter_from(query), kPatientsPerSession);
      if (auto it = query.find("format"); it != query.end() && it->second == "csv") {
        std::ostringstream out;
        report.write_csv(out);
        return {200, "text/csv", out.str()};
      }
      return json_response(200, report.to_json());
    }
    if (seg[1] == "export.csv") {
      std::ostringstream out;
      write_response_csv(out, service_.export_responses(filter_from(query)));
      return {200, "text/csv", out.str()};
    }
    if (seg[1] == "bandit") return json_response(200, service_.bandit_snapshot_json());
  }
  return error_response(404, "not_found", "no such route");
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const ApiHandlers& handlers) : impl_(std::make_unique<Impl>()) {
  auto dispatch = [&handlers](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q[k] = v;
    const auto out = handlers.handle(req.method, req.path, q, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  auto& s = impl_->server;
  s.set_tcp_nodelay(true);
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Get(".*", dispatch);
  s.Post(".*", dispatch);
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw ServiceError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

ApiResponse SurveyClient::checked(std::string_view method, const std::string& target, const std::string& body) {
  auto res = request(method, target, body);
  if (res.status < 400) return res;
  std::string code = "error";
  std::string message = res.body;
  try {
    const auto j = nlohmann::json::parse(res.body);
    code = j.at("error").at("code").get<std::string>();
    message = j.at("error").at("message").get<std::string>();
  } catch (const std::exception&) {
  }
  if (res.status == 404) throw NotFoundError(message);
  if (res.status == 409 || res.status == 410) throw StateError(code, message);
  if (res.status == 400) throw std::invalid_argument(message);
  throw ServiceError("HTTP " + std::to_string(res.status) + ": " + message);
}

nlohmann::json SurveyClient::health() { return checked("GET", "/").json(); }

nlohmann::json SurveyClient::start_session(Role role) {
  return checked("POST", "/api/sessions", nlohmann::json{{"role", to_string(role)}}.dump()).json();
}

nlohmann::json SurveyClient::next_step(const std::string& session_id) {
  return checked("GET", "/api/sessions/" + session_id + "/next").json();
}

nlohmann::json SurveyClient::submit_rating(const std::string& session_id, RatingKind kind, int rating,
                                           std::size_t step_ref) {
  const nlohmann::json body = {{"kind", to_string(kind)}, {"rating", rating}, {"step_ref", step_ref}};
  return checked("POST", "/api/sessions/" + session_id + "/ratings", body.dump()).json();
}

nlohmann::json SurveyClient::report(const ResponseFilter& filter) {
  return checked("GET", "/api/report" + query_string(filter)).json();
}

std::string SurveyClient::export_csv(const ResponseFilter& filter) {
  return checked("GET", "/api/export.csv" + query_string(filter)).body;
}

ApiResponse EmbeddedClient::request(std::string_view method, const std::string& target, const std::string& body) {
  const auto [path, query] = split_target(target);
  return handlers_.handle(method, path, query, body);
}

struct HttpClient::Impl {
  explicit Impl(const std::string& host, int port) : client(host, port) {}
  httplib::Client client;
};

HttpClient::HttpClient(std::string host, int port)
    : impl_(std::make_unique<Impl>(host, port)), host_(std::move(host)), port_(port) {
  impl_->client.set_keep_alive(true);
  impl_->client.set_tcp_nodelay(true);
}

HttpClient::~HttpClient() = default;

ApiResponse HttpClient::request(std::string_view method, const std::string& target, const std::string& body) {
  httplib::Result res = method == "POST" ? impl_->client.Post(target, body, "application/json")
                                         : impl_->client.Get(target);
  if (!res) {
    throw ServiceError("service unreachable at " + host_ + ":" + std::to_string(port_) + " (" +
                       httplib::to_string(res.error()) + ")");
  }
  return {res->status, res->get_header_value("Content-Type"), res->body};
}

}  // namespace trustdss
