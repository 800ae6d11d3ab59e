#include "trustdss/validation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "trustdss/metrics.hpp"
#include "trustdss/random.hpp"

namespace trustdss {

namespace {

std::array<std::vector<std::size_t>, 2> rows_by_class(std::span<const std::uint8_t> labels) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(i);
  return by_class;
}

}  // namespace

Holdout stratified_holdout(std::span<const std::uint8_t> labels, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in [0, 1)");
  Rng rng(derive_seed(seed, {hash_string("holdout")}));
  Holdout h;
  for (auto& rows : rows_by_class(labels)) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    h.test.insert(h.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    h.train.insert(h.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(h.train.begin(), h.train.end());
  std::sort(h.test.begin(), h.test.end());
  return h;
}

std::vector<int> stratified_kfold(std::span<const std::uint8_t> labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  auto by_class = rows_by_class(labels);
  const std::size_t minority = std::min(by_class[0].size(), by_class[1].size());
  if (minority < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("stratified " + std::to_string(k) + "-fold split needs at least " +
                                std::to_string(k) + " examples of each class, minority has " +
                                std::to_string(minority));
  }
  Rng rng(derive_seed(seed, {hash_string("kfold")}));
  std::vector<int> fold(labels.size(), -1);
  std::size_t dealt = 0;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (auto r : rows) fold[r] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return fold;
}

ModelMetrics evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return {accuracy(scores, labels), auc_roc(scores, labels), auc_pr(scores, labels)};
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

EvalReport EvalReport::from_folds(std::vector<FoldResult> folds) {
  EvalReport r;
  r.folds = std::move(folds);
  auto collect = [&](auto model, auto metric) {
    std::vector<double> v;
    for (const auto& f : r.folds) v.push_back(f.*model.*metric);
    return summarize(v);
  };
  auto summary = [&](ModelMetrics FoldResult::*model) {
    return ModelSummary{collect(model, &ModelMetrics::accuracy), collect(model, &ModelMetrics::auc_roc),
                        collect(model, &ModelMetrics::auc_pr)};
  };
  r.neural_network = summary(&FoldResult::neural_network);
  r.linear_regression = summary(&FoldResult::linear_regression);
  return r;
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "model,metric,mean,std\n";
  auto rows = [&](const char* name, const ModelSummary& s) {
    out << name << ",accuracy," << format_double(s.accuracy.mean) << ',' << format_double(s.accuracy.std) << '\n';
    out << name << ",auc_roc," << format_double(s.auc_roc.mean) << ',' << format_double(s.auc_roc.std) << '\n';
    out << name << ",auc_pr," << format_double(s.auc_pr.mean) << ',' << format_double(s.auc_pr.std) << '\n';
  };
  rows("neural_network", neural_network);
  rows("linear_regression", linear_regression);
}

namespace {

nlohmann::json metrics_json(const ModelMetrics& m) {
  return {{"accuracy", m.accuracy}, {"auc_roc", m.auc_roc}, {"auc_pr", m.auc_pr}};
}
ModelMetrics metrics_from(const nlohmann::json& j) {
  return {j.at("accuracy").get<double>(), j.at("auc_roc").get<double>(), j.at("auc_pr").get<double>()};
}
nlohmann::json summary_json(const ModelSummary& s) {
  auto m = [](const MetricSummary& x) { return nlohmann::json{{"mean", x.mean}, {"std", x.std}}; };
  return {{"accuracy", m(s.accuracy)}, {"auc_roc", m(s.auc_roc)}, {"auc_pr", m(s.auc_pr)}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    folds_json.push_back({{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_validation", f.n_validation},
                          {"neural_network", metrics_json(f.neural_network)},
                          {"linear_regression", metrics_json(f.linear_regression)}});
  }
  return {{"n_folds", folds.size()},
          {"folds", folds_json},
          {"neural_network", summary_json(neural_network)},
          {"linear_regression", summary_json(linear_regression)}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  std::vector<FoldResult> folds;
  for (const auto& f : j.at("folds")) {
    folds.push_back({f.at("fold").get<int>(), f.at("n_train").get<std::size_t>(),
                     f.at("n_validation").get<std::size_t>(), metrics_from(f.at("neural_network")),
                     metrics_from(f.at("linear_regression"))});
  }
  return from_folds(std::move(folds));
}

CrossValidationResult cross_validate(const CohortTable& cohort, const TrainConfig& config, double test_fraction) {
  config.validate();
  if (cohort.missing_count() > 0) throw std::invalid_argument("cross_validate: cohort must be fully imputed");
  CrossValidationResult result;
  auto holdout = stratified_holdout(cohort.outcomes(), test_fraction, derive_seed(config.seed, {hash_string("test")}));
  result.train_rows = std::move(holdout.train);
  result.test_rows = std::move(holdout.test);

  const CohortTable pool = cohort.subset(result.train_rows);
  const auto folds = stratified_kfold(pool.outcomes(), config.n_folds, config.seed);

  auto run_fold = [&](int k) {
    std::vector<std::size_t> fit_rows;
    std::vector<std::size_t> val_rows;
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == k ? val_rows : fit_rows).push_back(i);
    const CohortTable fit = pool.subset(fit_rows);
    const CohortTable val = pool.subset(val_rows);

    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, {hash_string("fold"), static_cast<std::uint64_t>(k)});
    const RiskModel nn = train(fit, fold_config);
    const LinearModel lin = train_linear_baseline(fit);

    FoldResult fr;
    fr.fold = k;
    fr.n_train = fit_rows.size();
    fr.n_validation = val_rows.size();
    fr.neural_network = evaluate(nn.predict(val), val.outcomes());
    fr.linear_regression = evaluate(lin.risks(val), val.outcomes());
    return fr;
  };

  std::vector<FoldResult> fold_results(static_cast<std::size_t>(config.n_folds));
  if (std::thread::hardware_concurrency() > 1) {
    std::vector<std::future<FoldResult>> pending;
    for (int k = 0; k < config.n_folds; ++k) pending.push_back(std::async(std::launch::async, run_fold, k));
    for (int k = 0; k < config.n_folds; ++k) fold_results[static_cast<std::size_t>(k)] = pending[static_cast<std::size_t>(k)].get();
  } else {
    for (int k = 0; k < config.n_folds; ++k) fold_results[static_cast<std::size_t>(k)] = run_fold(k);
  }
  result.report = EvalReport::from_folds(std::move(fold_results));
  return result;
}

}  // namespace trustdss
