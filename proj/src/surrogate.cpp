#include "trustdss/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "trustdss/error.hpp"

namespace trustdss {

int stratum_of(double risk) {
  if (!(risk >= 0.0 && risk <= 1.0)) {
    throw std::invalid_argument("stratum_of: risk must lie in [0, 1]");
  }
  if (risk < 0.2) return 0;
  if (risk < 0.4) return 1;
  if (risk < 0.6) return 2;
  if (risk < 0.8) return 3;
  return 4;
}

std::pair<double, double> stratum_bounds(int stratum) {
  static constexpr std::array<double, 6> edges = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  if (stratum < 0 || stratum >= kNumStrata) throw std::out_of_range("stratum index out of range");
  return {edges[static_cast<std::size_t>(stratum)], edges[static_cast<std::size_t>(stratum) + 1]};
}

// ---------------------------------------------------------------- linear

double StratumLinear::predict(std::span<const double> x) const {
  double s = intercept;
  for (const auto& c : coefficients) s += c.coefficient * x[c.feature];
  return s;
}

nlohmann::json StratumLinear::to_json() const {
  const auto [lo, hi] = stratum_bounds(stratum);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : coefficients) {
    rows.push_back({{"feature", c.name},
                    {"coefficient", c.coefficient},
                    {"std_error", c.std_error ? nlohmann::json(*c.std_error) : nlohmann::json(nullptr)},
                    {"p_value", c.p_value ? nlohmann::json(*c.p_value) : nlohmann::json(nullptr)},
                    {"significant", c.significant}});
  }
  return {{"stratum", stratum},     {"risk_range", {lo, hi}},        {"n_train", n_train},
          {"sparse", sparse},       {"intercept", intercept},        {"coefficients", rows},
          {"fidelity_mse", fidelity_mse}};
}

namespace {

struct StratumRows {
  std::array<std::vector<std::size_t>, kNumStrata> rows;
  std::vector<double> risk;
};

StratumRows partition(const RiskScorer& model, const CohortTable& cohort) {
  if (cohort.missing_count() > 0) throw std::invalid_argument("surrogates need a fully imputed cohort");
  StratumRows s;
  s.risk = model.risks(cohort);
  for (std::size_t r = 0; r < s.risk.size(); ++r) {
    s.rows[static_cast<std::size_t>(stratum_of(s.risk[r]))].push_back(r);
  }
  for (int k = 0; k < kNumStrata; ++k) {
    if (s.rows[static_cast<std::size_t>(k)].empty()) {
      const auto [lo, hi] = stratum_bounds(k);
      throw DataError("stratum " + std::to_string(k) + " (risk " + format_double(lo) + "-" + format_double(hi) +
                      ") contains no rows");
    }
  }
  return s;
}

StratumLinear fit_linear_stratum(int k, const CohortTable& cohort, const std::vector<std::size_t>& rows,
                                 const std::vector<double>& risk) {
  const auto& schema = cohort.schema();
  const std::size_t p = schema.size();
  StratumLinear out;
  out.stratum = k;
  out.n_train = rows.size();
  out.sparse = rows.size() < kMinRowsPerStratum;

  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = risk[rows[i]];
  const double y_mean = y.mean();
  const double y_var = (y.array() - y_mean).square().mean();

  out.coefficients.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    out.coefficients[j].feature = j;
    out.coefficients[j].name = schema[j].name;
  }
  if (y_var == 0.0) {
    // Constant risk: nothing to explain.
    out.intercept = y_mean;
    for (auto& c : out.coefficients) {
      c.std_error = 0.0;
      c.p_value = 1.0;
    }
    return out;
  }

  const Matrix x = cohort.feature_matrix(rows);
  const OlsFit fit = fit_ols(x, y, /*with_covariance=*/true);
  out.intercept = fit.coefficients(0);
  const double df = static_cast<double>(fit.n) - static_cast<double>(fit.p);
  // Exact fits still get a finite standard error so round-off sized
  // coefficients do not read as significant.
  const double sigma2 = df > 0 ? std::max(fit.rss / df, 1e-18 * y_var) : 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    auto& c = out.coefficients[j];
    const auto idx = static_cast<Eigen::Index>(j) + 1;
    c.coefficient = fit.coefficients(idx);
    if (df <= 0) continue;
    const double se = std::sqrt(sigma2 * std::max(fit.xtx_inverse(idx, idx), 0.0));
    c.std_error = se;
    if (se == 0.0) {
      c.p_value = c.coefficient == 0.0 ? 1.0 : 0.0;
    } else {
      const boost::math::students_t_distribution<double> t_dist(df);
      const double t = std::abs(c.coefficient / se);
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(t_dist, t));
    }
    c.significant = *c.p_value < kSignificanceLevel;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double d = out.predict(cohort.row(rows[i])) - y(static_cast<Eigen::Index>(i));
    sse += d * d;
  }
  out.fidelity_mse = sse / static_cast<double>(rows.size());
  return out;
}

}  // namespace

std::array<StratumLinear, kNumStrata> fit_stratified_linear(const RiskScorer& model, const CohortTable& cohort) {
  const auto s = partition(model, cohort);
  std::array<StratumLinear, kNumStrata> out;
  for (int k = 0; k < kNumStrata; ++k) {
    out[static_cast<std::size_t>(k)] = fit_linear_stratum(k, cohort, s.rows[static_cast<std::size_t>(k)], s.risk);
  }
  return out;
}

// ---------------------------------------------------------------- trees

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("regression tree needs a root");
  for (const auto& n : nodes_) {
    if (n.is_leaf()) continue;
    const auto size = static_cast<int>(nodes_.size());
    if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size || !std::isfinite(n.threshold)) {
      throw std::invalid_argument("malformed regression tree node");
    }
  }
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

int RegressionTree::depth() const {
  auto rec = [&](auto&& self, std::size_t i) -> int {
    const auto& n = nodes_[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(self(self, static_cast<std::size_t>(n.left)), self(self, static_cast<std::size_t>(n.right)));
  };
  return nodes_.empty() ? 0 : rec(rec, 0);
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

nlohmann::json RegressionTree::to_json(const FeatureSchema& schema) const {
  auto rec = [&](auto&& self, std::size_t i) -> nlohmann::json {
    const auto& n = nodes_[i];
    if (n.is_leaf()) return {{"leaf_value", n.value}, {"n", n.n}};
    return {{"feature", schema[static_cast<std::size_t>(n.feature)].name},
            {"threshold", n.threshold},
            {"n", n.n},
            {"mean", n.value},
            {"left", self(self, static_cast<std::size_t>(n.left))},
            {"right", self(self, static_cast<std::size_t>(n.right))}};
  };
  return rec(rec, 0);
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j, const FeatureSchema& schema) {
  std::vector<TreeNode> nodes;
  auto rec = [&](auto&& self, const nlohmann::json& node) -> int {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(id)].n = node.value("n", std::size_t{0});
    if (node.contains("leaf_value")) {
      nodes[static_cast<std::size_t>(id)].value = node.at("leaf_value").get<double>();
      return id;
    }
    TreeNode t;
    t.feature = static_cast<int>(schema.index_of(node.at("feature").get<std::string>()));
    t.threshold = node.at("threshold").get<double>();
    t.value = node.value("mean", 0.0);
    t.n = node.value("n", std::size_t{0});
    t.left = self(self, node.at("left"));
    t.right = self(self, node.at("right"));
    nodes[static_cast<std::size_t>(id)] = t;
    return id;
  };
  rec(rec, j);
  return RegressionTree(std::move(nodes));
}

namespace {

struct TreeBuilder {
  const Matrix& x;
  std::span<const double> y;
  const TreeOptions& opt;
  std::vector<TreeNode> nodes;
  double root_sse = -1.0;

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (auto r : rows) mean += y[r];
    mean /= n;
    double sse = 0.0;
    double y_min = y[rows.front()];
    double y_max = y_min;
    for (auto r : rows) {
      sse += (y[r] - mean) * (y[r] - mean);
      y_min = std::min(y_min, y[r]);
      y_max = std::max(y_max, y[r]);
    }
    if (root_sse < 0.0) root_sse = sse;
    nodes[static_cast<std::size_t>(id)].value = mean;
    nodes[static_cast<std::size_t>(id)].n = rows.size();

    if (depth >= opt.max_depth || rows.size() < 2 * opt.min_leaf || !(y_min < y_max)) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = 1e-12 * root_sse;
    std::vector<std::size_t> sorted = rows;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a), j) < x(static_cast<Eigen::Index>(b), j);
      });
      double s1 = 0.0;
      double s2 = 0.0;
      double total1 = 0.0;
      double total2 = 0.0;
      for (auto r : sorted) {
        const double d = y[r] - mean;
        total1 += d;
        total2 += d * d;
      }
      for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double d = y[sorted[i - 1]] - mean;
        s1 += d;
        s2 += d * d;
        const double lo = x(static_cast<Eigen::Index>(sorted[i - 1]), j);
        const double hi = x(static_cast<Eigen::Index>(sorted[i]), j);
        if (i < opt.min_leaf || sorted.size() - i < opt.min_leaf || !(lo < hi)) continue;
        const double nl = static_cast<double>(i);
        const double nr = n - nl;
        const double sse_left = s2 - s1 * s1 / nl;
        const double r1 = total1 - s1;
        const double sse_right = (total2 - s2) - r1 * r1 / nr;
        const double gain = sse - (sse_left + sse_right);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_threshold = lo + (hi - lo) / 2.0;
          if (!(best_threshold > lo)) best_threshold = hi;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) {
      (x(static_cast<Eigen::Index>(r), best_feature) < best_threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

RegressionTree fit_regression_tree(const Matrix& x, std::span<const double> y, const TreeOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw std::invalid_argument("fit_regression_tree: need matching, non-empty x and y");
  }
  if (options.max_depth < 0 || options.min_leaf < 1) throw std::invalid_argument("invalid tree options");
  TreeBuilder b{x, y, options, {}};
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  b.build(std::move(rows), 0);
  return RegressionTree(std::move(b.nodes));
}

nlohmann::json StratumTree::to_json(const FeatureSchema& schema) const {
  const auto [lo, hi] = stratum_bounds(stratum);
  return {{"stratum", stratum},
          {"risk_range", {lo, hi}},
          {"n_train", n_train},
          {"depth", tree.depth()},
          {"leaves", tree.leaf_count()},
          {"fidelity_mse", fidelity_mse},
          {"target_variance", target_variance},
          {"tree", tree.to_json(schema)}};
}

std::array<StratumTree, kNumStrata> fit_stratified_trees(const RiskScorer& model, const CohortTable& cohort,
                                                         const TreeOptions& options) {
  const auto s = partition(model, cohort);
  std::array<StratumTree, kNumStrata> out;
  for (int k = 0; k < kNumStrata; ++k) {
    const auto& rows = s.rows[static_cast<std::size_t>(k)];
    const Matrix x = cohort.feature_matrix(rows);
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = s.risk[rows[i]];
    auto& st = out[static_cast<std::size_t>(k)];
    st.stratum = k;
    st.n_train = rows.size();
    st.tree = fit_regression_tree(x, y, options);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double var = 0.0;
    double mse = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      var += (y[i] - mean) * (y[i] - mean);
      const double d = st.tree.predict(cohort.row(rows[i])) - y[i];
      mse += d * d;
    }
    st.target_variance = var / static_cast<double>(y.size());
    st.fidelity_mse = mse / static_cast<double>(y.size());
  }
  return out;
}

std::array<StratumModel, kNumStrata> fit_strata(const RiskScorer& model, const CohortTable& cohort,
                                                const TreeOptions& options) {
  auto lin = fit_stratified_linear(model, cohort);
  auto trees = fit_stratified_trees(model, cohort, options);
  std::array<StratumModel, kNumStrata> out;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {std::move(lin[k]), std::move(trees[k])};
  return out;
}

}  // namespace trustdss
