#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/risk_model.hpp"

namespace trustdss {

inline constexpr int kNumStrata = 5;

// Risk quintile, left-closed: [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
int stratum_of(double risk);
std::pair<double, double> stratum_bounds(int stratum);

inline constexpr double kSignificanceLevel = 0.05;
inline constexpr std::size_t kMinRowsPerStratum = kNumFeatures + 1;

struct LinearCoefficient {
  std::size_t feature = 0;
  std::string name;
  double coefficient = 0.0;
  std::optional<double> std_error;
  std::optional<double> p_value;  // two-sided t-test; absent when df <= 0
  bool significant = false;
};

struct StratumLinear {
  int stratum = 0;
  std::size_t n_train = 0;
  bool sparse = false;  // fewer than kMinRowsPerStratum rows
  double intercept = 0.0;
  std::vector<LinearCoefficient> coefficients;
  double fidelity_mse = 0.0;

  double predict(std::span<const double> x) const;
  nlohmann::json to_json() const;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // rows with x[feature] < threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the rows reaching this node
  std::size_t n = 0;

  bool is_leaf() const { return feature < 0; }
};

struct TreeOptions {
  int max_depth = 3;
  std::size_t min_leaf = 5;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> x) const;
  int depth() const;
  std::size_t leaf_count() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  // Nested records: internal nodes carry feature/threshold/left/right,
  // leaves carry leaf_value.
  nlohmann::json to_json(const FeatureSchema& schema) const;
  static RegressionTree from_json(const nlohmann::json& j, const FeatureSchema& schema);

 private:
  std::vector<TreeNode> nodes_;  // nodes_[0] is the root
};

// Greedy CART regression: at each node the split with the largest
// squared-error reduction, subject to the depth cap and leaf minimum. Ties
// resolve to the lowest feature index, then the lowest threshold.
RegressionTree fit_regression_tree(const Matrix& x, std::span<const double> y, const TreeOptions& options = {});

struct StratumTree {
  int stratum = 0;
  std::size_t n_train = 0;
  RegressionTree tree;
  double fidelity_mse = 0.0;
  double target_variance = 0.0;  // variance of the model's risks in the stratum

  nlohmann::json to_json(const FeatureSchema& schema) const;
};

// Per stratum of the scorer's risk, OLS of the risk on the features with
// t-test significance flags. Throws DataError naming an empty stratum.
std::array<StratumLinear, kNumStrata> fit_stratified_linear(const RiskScorer& model, const CohortTable& cohort);

std::array<StratumTree, kNumStrata> fit_stratified_trees(const RiskScorer& model, const CohortTable& cohort,
                                                         const TreeOptions& options = {});

struct StratumModel {
  StratumLinear linear;
  StratumTree tree;
};

std::array<StratumModel, kNumStrata> fit_strata(const RiskScorer& model, const CohortTable& cohort,
                                                const TreeOptions& options = {});

}  // namespace trustdss
