#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trustdss/api.hpp"
#include "trustdss/bandit.hpp"
#include "trustdss/cohort.hpp"
#include "trustdss/error.hpp"
#include "trustdss/metrics.hpp"
#include "trustdss/rater_sim.hpp"
#include "trustdss/report.hpp"
#include "trustdss/survey_service.hpp"

namespace py = pybind11;
using namespace trustdss;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<EvidenceKind> kinds_of(const std::vector<std::string>& names) {
  std::vector<EvidenceKind> out;
  for (const auto& n : names) out.push_back(evidence_kind_from_string(n));
  return out;
}

ResponseFilter make_filter(const std::optional<std::string>& role, std::optional<int> part) {
  ResponseFilter f;
  if (role) f.role = role_from_string(*role);
  f.part = part;
  return f;
}

// Python-facing bandit over one of the two catalogs.
class PyBandit {
 public:
  explicit PyBandit(int part) : catalog_(catalog_for_part(part)), state_(BanditState::fresh(catalog_)) {}

  std::string select() const { return std::string(1, catalog_.arms[select_arm(state_, catalog_)].id); }
  void record(const std::string& arm, double reward) {
    if (arm.size() != 1) throw std::invalid_argument("arm ids are single letters");
    state_ = record_reward(state_, catalog_, arm[0], Reward(reward));
  }
  std::vector<std::uint64_t> pulls() const {
    std::vector<std::uint64_t> out;
    for (const auto& a : state_.arms) out.push_back(a.pulls);
    return out;
  }
  std::vector<double> means() const {
    std::vector<double> out;
    for (const auto& a : state_.arms) out.push_back(a.mean());
    return out;
  }
  std::vector<std::optional<double>> upper_bounds() const {
    std::vector<std::optional<double>> out;
    for (const auto& b : ucb_bounds(state_, catalog_)) out.push_back(b.upper_bound);
    return out;
  }
  std::uint64_t total_pulls() const { return state_.total_pulls; }

 private:
  ArmCatalog catalog_;
  BanditState state_;
};

// In-process survey service driven through the same routes as HTTP.
class PyService {
 public:
  PyService(std::optional<std::string> data_dir, std::uint64_t seed, std::optional<std::string> bundle) {
    ServiceConfig cfg;
    if (data_dir) cfg.data_dir = *data_dir;
    cfg.seed = seed;
    std::shared_ptr<const EvidenceBundle> b;
    if (bundle) b = std::make_shared<const EvidenceBundle>(EvidenceBundle::load(*bundle));
    service_ = std::make_unique<SurveyService>(cfg, b);
    handlers_ = std::make_unique<ApiHandlers>(*service_);
    client_ = std::make_unique<EmbeddedClient>(*handlers_);
  }

  py::object start_session(const std::string& role) { return to_py(client_->start_session(role_from_string(role))); }
  py::object next_step(const std::string& id) { return to_py(client_->next_step(id)); }
  py::object submit_rating(const std::string& id, const std::string& kind, int rating, std::size_t step_ref) {
    return to_py(client_->submit_rating(id, rating_kind_from_string(kind), rating, step_ref));
  }
  py::object report(std::optional<std::string> role, std::optional<int> part) {
    return to_py(client_->report(make_filter(role, part)));
  }
  std::string export_csv(std::optional<std::string> role, std::optional<int> part) {
    return client_->export_csv(make_filter(role, part));
  }
  py::object bandit() const { return to_py(service_->bandit_snapshot_json()); }
  py::object simulate(const py::object& population, std::size_t n_sessions, std::uint64_t seed) {
    const Population pop = population.is_none() ? default_population() : Population::from_json(from_py(population));
    const auto trace = run_simulation(pop, n_sessions, seed, *client_);
    std::ostringstream out;
    trace.write_csv(out);
    return py::str(out.str());
  }

 private:
  std::unique_ptr<SurveyService> service_;
  std::unique_ptr<ApiHandlers> handlers_;
  std::unique_ptr<EmbeddedClient> client_;
};

}  // namespace

PYBIND11_MODULE(_trustdss, m) {
  m.doc() = "Trust-learning decision support core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_KeyError);
  py::register_exception<ServiceError>(m, "ServiceError", PyExc_RuntimeError);
  static py::handle state_error = py::exception<StateError>(m, "StateError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StateError& e) {
      py::object err = state_error(py::str(e.what()));
      err.attr("code") = e.code();
      PyErr_SetObject(state_error.ptr(), err.ptr());
    }
  });

  m.def("arm_catalog", [](int part) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& a : catalog_for_part(part).arms) {
      std::vector<std::string> kinds;
      for (auto k : a.evidence) kinds.emplace_back(to_string(k));
      out.emplace_back(std::string(1, a.id), kinds);
    }
    return out;
  }, py::arg("part"), "Ordered (arm id, evidence kinds) pairs for part 1 or 2.");

  m.def("normalize_rating", [](int r) { return normalize_rating(r).value(); }, py::arg("rating"));
  m.def("ucb_value", &ucb_value, py::arg("mean"), py::arg("arm_pulls"), py::arg("total_pulls"));

  py::class_<PyBandit>(m, "Bandit")
      .def(py::init<int>(), py::arg("part"))
      .def("select", &PyBandit::select)
      .def("record", &PyBandit::record, py::arg("arm"), py::arg("reward"))
      .def_property_readonly("pulls", &PyBandit::pulls)
      .def_property_readonly("means", &PyBandit::means)
      .def_property_readonly("upper_bounds", &PyBandit::upper_bounds)
      .def_property_readonly("total_pulls", &PyBandit::total_pulls);

  m.def("auc_roc", [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) { return auc_roc(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def("auc_pr", [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) { return auc_pr(s, y); },
        py::arg("scores"), py::arg("labels"));

  m.def("feature_names", [] {
    std::vector<std::string> out;
    const auto schema = FeatureSchema::heart_failure();
    for (const auto& f : schema.features()) out.push_back(f.name);
    return out;
  });
  m.def("generate_cohort", [](std::size_t n, std::uint64_t seed, double prevalence) {
    GeneratorConfig cfg;
    cfg.n_patients = n;
    cfg.seed = seed;
    cfg.target_prevalence = prevalence;
    const auto cohort = generate_cohort(cfg);
    std::vector<std::uint8_t> y(cohort.outcomes().begin(), cohort.outcomes().end());
    return py::make_tuple(cohort.feature_matrix(), y);
  }, py::arg("n_patients"), py::arg("seed") = 7, py::arg("prevalence") = 0.188,
     "Synthetic cohort as (features, outcomes).");

  m.def("rate_sequence", [](const py::object& profile, const std::vector<std::string>& kinds, std::uint64_t draw,
                            std::optional<std::size_t> patient) {
    return rate_sequence(RaterProfile::from_json(from_py(profile)), kinds_of(kinds), draw, patient);
  }, py::arg("profile"), py::arg("kinds"), py::arg("draw_index"), py::arg("patient") = py::none());
  m.def("expected_rating", [](const py::object& profile, const std::vector<std::string>& kinds,
                              std::optional<std::size_t> patient) {
    return expected_rating(RaterProfile::from_json(from_py(profile)), kinds_of(kinds), patient);
  }, py::arg("profile"), py::arg("kinds"), py::arg("patient") = py::none());
  m.def("default_population", [] { return to_py(default_population().to_json()); });

  py::class_<PyService>(m, "Service")
      .def(py::init<std::optional<std::string>, std::uint64_t, std::optional<std::string>>(),
           py::arg("data_dir") = py::none(), py::arg("seed") = 1, py::arg("bundle") = py::none())
      .def("start_session", &PyService::start_session, py::arg("role"))
      .def("next_step", &PyService::next_step, py::arg("session_id"))
      .def("submit_rating", &PyService::submit_rating, py::arg("session_id"), py::arg("kind"), py::arg("rating"),
           py::arg("step_ref"))
      .def("report", &PyService::report, py::arg("role") = py::none(), py::arg("part") = py::none())
      .def("export_csv", &PyService::export_csv, py::arg("role") = py::none(), py::arg("part") = py::none())
      .def("bandit", &PyService::bandit)
      .def("simulate", &PyService::simulate, py::arg("population") = py::none(), py::arg("n_sessions") = 44,
           py::arg("seed") = 1, "Runs simulated raters against this service; returns the trace CSV.");
}
