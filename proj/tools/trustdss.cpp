// trustdss: build the evidence bundle, serve the survey, simulate raters and
// report on collected responses.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trustdss/api.hpp"
#include "trustdss/error.hpp"
#include "trustdss/pipeline.hpp"
#include "trustdss/rater_sim.hpp"
#include "trustdss/report.hpp"
#include "trustdss/survey_service.hpp"

namespace fs = std::filesystem;
using namespace trustdss;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitService = 3;

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> port;
  std::string host;
  std::string data_dir;
  std::string bundle;
  std::string format = "json";
  std::string role;
  std::optional<int> part;
  std::string population;
  std::optional<std::size_t> sessions;
  std::string trace;
  std::string out;
  std::string remote;
};

// Root config with flags layered on top.
struct Resolved {
  PipelineConfig pipeline;
  std::string bundle = "bundle";
  std::string data_dir = "data";
  int port = 8080;
  std::string host = "127.0.0.1";
  std::uint64_t service_seed = 1;
  nlohmann::json population;
  std::size_t sessions = 44;
};

Resolved resolve(const Options& o) {
  Resolved r;
  nlohmann::json root = nlohmann::json::object();
  fs::path base = fs::current_path();
  if (!o.config.empty()) {
    root = read_json_file(o.config);
    base = fs::absolute(o.config).parent_path();
  }
  try {
    r.pipeline = PipelineConfig::from_json(root);
  } catch (const std::exception& e) {
    throw DataError(std::string("invalid config: ") + e.what());
  }
  auto rel = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  r.bundle = rel(root.value("bundle_dir", r.bundle));
  if (root.contains("service")) {
    const auto& s = root.at("service");
    r.data_dir = rel(s.value("data_dir", r.data_dir));
    r.port = s.value("port", r.port);
    r.host = s.value("host", r.host);
    r.service_seed = s.value("seed", r.service_seed);
  } else {
    r.data_dir = rel(r.data_dir);
  }
  if (root.contains("simulation")) {
    const auto& s = root.at("simulation");
    r.sessions = s.value("n_sessions", r.sessions);
    if (s.contains("population")) {
      const auto& p = s.at("population");
      r.population = p.is_string() ? read_json_file(rel(p.get<std::string>())) : p;
    }
  }
  if (o.seed) {
    r.pipeline.seed = *o.seed;
    r.service_seed = *o.seed;
  }
  if (o.port) r.port = *o.port;
  if (!o.data_dir.empty()) r.data_dir = o.data_dir;
  if (!o.bundle.empty()) r.bundle = o.bundle;
  if (!o.population.empty()) r.population = read_json_file(o.population);
  if (o.sessions) r.sessions = *o.sessions;
  if (r.population.is_null()) r.population = default_population().to_json();
  return r;
}

ResponseFilter filter_of(const Options& o) {
  ResponseFilter f;
  if (!o.role.empty()) f.role = role_from_string(o.role);
  f.part = o.part;
  return f;
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + o.out);
  out << text;
}

std::string render_report(const ArmReport& report, const std::string& format) {
  std::ostringstream out;
  if (format == "csv") {
    report.write_csv(out);
  } else {
    out << report.to_json().dump(2) << '\n';
  }
  return out.str();
}

int cmd_build(const Options& o) {
  const auto r = resolve(o);
  run_build(r.pipeline, r.bundle, [](std::string_view stage) { std::cerr << "[build] " << stage << "\n"; });
  std::cerr << "[build] bundle written to " << r.bundle << "\n";
  return 0;
}

std::shared_ptr<const EvidenceBundle> load_bundle(const std::string& dir) {
  return std::make_shared<const EvidenceBundle>(EvidenceBundle::load(dir));
}

int cmd_serve(const Options& o) {
  const auto r = resolve(o);
  auto bundle = load_bundle(r.bundle);
  ServiceConfig cfg;
  cfg.data_dir = r.data_dir;
  cfg.seed = r.service_seed;
  SurveyService service(cfg, bundle);
  ApiHandlers handlers(service, {{"bundle", r.bundle}, {"data_dir", r.data_dir}, {"version", "0.1.0"}});
  HttpServer server(handlers);
  const std::string host = o.host.empty() ? r.host : o.host;
  const int port = server.bind(host, r.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "[serve] listening on " << host << ":" << port << " (" << service.session_count()
            << " sessions replayed)\n";
  server.listen();
  g_server = nullptr;
  std::cerr << "[serve] stopped\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  const auto r = resolve(o);
  Population population;
  try {
    population = Population::from_json(r.population);
  } catch (const std::exception& e) {
    throw DataError(std::string("invalid population spec: ") + e.what());
  }

  SimulationTrace trace;
  std::string export_csv;
  if (!o.remote.empty()) {
    const auto colon = o.remote.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("--remote expects host:port");
    HttpClient client(o.remote.substr(0, colon), std::stoi(o.remote.substr(colon + 1)));
    client.health();
    trace = run_simulation(population, r.sessions, r.pipeline.seed, client);
    export_csv = client.export_csv();
  } else {
    ServiceConfig cfg;
    if (!o.data_dir.empty()) cfg.data_dir = r.data_dir;
    cfg.seed = r.service_seed;
    std::shared_ptr<const EvidenceBundle> bundle;
    if (!o.bundle.empty()) bundle = load_bundle(r.bundle);
    SurveyService service(cfg, bundle);
    ApiHandlers handlers(service);
    EmbeddedClient client(handlers);
    trace = run_simulation(population, r.sessions, r.pipeline.seed, client);
    export_csv = client.export_csv();
  }

  if (!o.trace.empty()) {
    std::ofstream out(o.trace, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + o.trace);
    trace.write_csv(out);
  }
  std::cerr << "[simulate] " << trace.session_ids.size() << " sessions, " << trace.rows.size() << " bandit pulls\n";
  for (const auto& [key, regret] : trace.final_regret()) {
    std::cerr << "[simulate] part " << key.part << " " << to_string(key.role) << ": cumulative regret "
              << format_double(regret) << "\n";
  }
  std::istringstream in(export_csv);
  emit(o, render_report(build_report(read_response_csv(in), filter_of(o)), o.format));
  return 0;
}

ResponseTable replay_table(const std::string& data_dir) {
  const fs::path log = fs::path(data_dir) / "events.jsonl";
  if (!fs::exists(log)) throw DataError("no response log at " + log.string());
  ServiceConfig cfg;
  cfg.data_dir = data_dir;
  cfg.read_only = true;
  SurveyService service(cfg);
  if (service.event_count() == 0) throw DataError("response log " + log.string() + " is empty");
  return service.export_responses();
}

int cmd_report(const Options& o) {
  const auto r = resolve(o);
  const auto table = replay_table(r.data_dir);
  emit(o, render_report(build_report(table, filter_of(o)), o.format));
  return 0;
}

int cmd_export(const Options& o) {
  const auto r = resolve(o);
  const auto table = replay_table(r.data_dir);
  const auto f = filter_of(o);
  ResponseTable filtered;
  for (const auto& row : table) {
    if (f.accepts(row)) filtered.push_back(row);
  }
  std::ostringstream out;
  write_response_csv(out, filtered);
  emit(o, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-learning decision support: evidence bundle, survey service and bandit reports"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Root JSON config file")->envname("TRUSTDSS_CONFIG");
    sub->add_option("--seed", o.seed, "Override the root seed")->envname("TRUSTDSS_SEED");
  };
  auto add_filter = [&](CLI::App* sub) {
    sub->add_option("--role", o.role, "Only this role")->check(CLI::IsMember({"clinician", "ml_expert"}));
    sub->add_option("--part", o.part, "Only this part")->check(CLI::IsMember({1, 2}));
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", o.out, "Write to a file instead of stdout");
  };

  auto* build = app.add_subcommand("build", "Generate, impute, train and write the evidence bundle");
  add_common(build);
  build->add_option("--bundle", o.bundle, "Output directory")->envname("TRUSTDSS_BUNDLE");

  auto* serve = app.add_subcommand("serve", "Run the survey service");
  add_common(serve);
  serve->add_option("--bundle", o.bundle, "Evidence bundle directory")->envname("TRUSTDSS_BUNDLE");
  serve->add_option("--port", o.port, "TCP port (0 picks a free one)")->envname("TRUSTDSS_PORT");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--data-dir", o.data_dir, "Event log directory")->envname("TRUSTDSS_DATA_DIR");

  auto* simulate = app.add_subcommand("simulate", "Run simulated raters through the survey service");
  add_common(simulate);
  add_filter(simulate);
  add_format(simulate);
  simulate->add_option("--population", o.population, "Population spec (JSON)");
  simulate->add_option("--sessions,-n", o.sessions, "Number of sessions");
  simulate->add_option("--trace", o.trace, "Write the per-pull trace CSV here");
  simulate->add_option("--data-dir", o.data_dir, "Persist the simulated study's event log here");
  simulate->add_option("--bundle", o.bundle, "Serve evidence payloads from this bundle");
  simulate->add_option("--remote", o.remote, "Drive a running service at host:port");

  auto* report = app.add_subcommand("report", "Per-arm, per-evidence and per-patient summaries");
  add_common(report);
  add_filter(report);
  add_format(report);
  report->add_option("--data-dir", o.data_dir, "Event log directory")->envname("TRUSTDSS_DATA_DIR");

  auto* exp = app.add_subcommand("export", "Flat response table as CSV");
  add_common(exp);
  add_filter(exp);
  exp->add_option("--data-dir", o.data_dir, "Event log directory")->envname("TRUSTDSS_DATA_DIR");
  exp->add_option("--out", o.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*build) return cmd_build(o);
    if (*serve) return cmd_serve(o);
    if (*simulate) return cmd_simulate(o);
    if (*report) return cmd_report(o);
    if (*exp) return cmd_export(o);
  } catch (const ServiceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitService;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitService;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
