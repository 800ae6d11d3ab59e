#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/risk_model.hpp"

namespace trustdss {

struct Holdout {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class, round(fraction * class size) rows go to `test`. Both lists are
// sorted.
Holdout stratified_holdout(std::span<const std::uint8_t> labels, double fraction, std::uint64_t seed);

// Fold id for each row. Rows of each class are shuffled and dealt round robin,
// continuing across classes so fold sizes differ by at most one.
std::vector<int> stratified_kfold(std::span<const std::uint8_t> labels, int k, std::uint64_t seed);

struct ModelMetrics {
  double accuracy = 0.0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
};

ModelMetrics evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across folds
};

MetricSummary summarize(std::span<const double> values);

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  ModelMetrics neural_network;
  ModelMetrics linear_regression;
};

struct ModelSummary {
  MetricSummary accuracy;
  MetricSummary auc_roc;
  MetricSummary auc_pr;
};

struct EvalReport {
  std::vector<FoldResult> folds;
  ModelSummary neural_network;
  ModelSummary linear_regression;

  static EvalReport from_folds(std::vector<FoldResult> folds);

  // Columns: model,metric,mean,std
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

struct CrossValidationResult {
  EvalReport report;
  std::vector<std::size_t> train_rows;  // rows available for model fitting
  std::vector<std::size_t> test_rows;   // reserved before folding
};

inline constexpr double kDefaultTestFraction = 0.1;

// Reserves a stratified test partition, then runs stratified k-fold CV of the
// network and the linear baseline on the remaining rows.
CrossValidationResult cross_validate(const CohortTable& cohort, const TrainConfig& config,
                                     double test_fraction = kDefaultTestFraction);

}  // namespace trustdss
