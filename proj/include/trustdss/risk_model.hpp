#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "trustdss/cohort.hpp"
#include "trustdss/linalg.hpp"

namespace trustdss {

// Anything that maps a raw feature vector to a risk in [0, 1]. Surrogates,
// scenarios and sensitivity tables are built against this interface.
class RiskScorer {
 public:
  virtual ~RiskScorer() = default;
  virtual double risk(std::span<const double> features) const = 0;
  std::vector<double> risks(const CohortTable& cohort) const;
};

struct DenseLayer {
  Matrix weights;  // inputs x outputs
  Vector bias;     // outputs
};

// 31 -> 100 -> 20 -> 1, rectifier hidden units, logistic output.
struct MlpParams {
  static constexpr std::array<std::size_t, 4> kLayerSizes = {kNumFeatures, 100, 20, 1};

  std::array<DenseLayer, 3> layers;

  static MlpParams zeros();
  // He-normal weights, zero biases.
  static MlpParams random(std::uint64_t seed);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  static MlpParams unflatten(std::span<const double> flat);
  bool all_finite() const;
  // Throws std::invalid_argument on wrong shapes or non-finite values.
  void validate() const;
};

// Risk for one (already standardized) input; strictly inside (0, 1).
double forward(const MlpParams& params, std::span<const double> x);
// Pre-sigmoid output for every row.
Vector forward_logits(const MlpParams& params, const Matrix& x);

struct LossAndGradient {
  double loss = 0.0;  // mean binary cross-entropy
  MlpParams gradient;
};

LossAndGradient log_loss_gradient(const MlpParams& params, const Matrix& x,
                                  std::span<const std::uint8_t> labels);
double log_loss(const MlpParams& params, const Matrix& x, std::span<const std::uint8_t> labels);

struct StandardScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static StandardScaler fit(const Matrix& x);
  Matrix transform(const Matrix& x) const;
  void transform_row(std::span<const double> in, std::span<double> out) const;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int patience = 10;
  std::uint64_t seed = 1;
  int n_folds = 5;
  // Share of the training input held back for early stopping.
  double validation_fraction = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

class RiskModel : public RiskScorer {
 public:
  RiskModel() = default;
  RiskModel(StandardScaler scaler, MlpParams params, TrainConfig config);

  double risk(std::span<const double> features) const override;
  std::vector<double> predict(const CohortTable& cohort) const;

  const MlpParams& params() const { return params_; }
  const StandardScaler& scaler() const { return scaler_; }
  const TrainConfig& config() const { return config_; }

  int epochs_trained = 0;
  double best_validation_auc = 0.0;

  nlohmann::json to_json() const;
  static RiskModel from_json(const nlohmann::json& j);

 private:
  StandardScaler scaler_;
  MlpParams params_ = MlpParams::zeros();
  TrainConfig config_;
};

// Momentum SGD on binary cross-entropy, early stopping on validation AUC-ROC
// (validation log-loss breaks ties) with the best epoch restored.
RiskModel train(const CohortTable& cohort, const TrainConfig& config);

// Ordinary least squares of the 0/1 outcome on the features.
class LinearModel : public RiskScorer {
 public:
  LinearModel() = default;
  explicit LinearModel(Vector coefficients);

  double intercept() const { return coefficients_(0); }
  double slope(std::size_t feature) const { return coefficients_(static_cast<Eigen::Index>(feature) + 1); }
  const Vector& coefficients() const { return coefficients_; }
  bool ridge_fallback = false;

  double raw(std::span<const double> features) const;
  // Prediction clamped to [0, 1].
  double risk(std::span<const double> features) const override;

 private:
  Vector coefficients_ = Vector::Zero(kNumFeatures + 1);
};

LinearModel train_linear_baseline(const CohortTable& cohort);

}  // namespace trustdss
