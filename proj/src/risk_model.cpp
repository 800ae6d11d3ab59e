#include "trustdss/risk_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "trustdss/error.hpp"
#include "trustdss/metrics.hpp"
#include "trustdss/random.hpp"
#include "trustdss/validation.hpp"

namespace trustdss {

namespace {

constexpr double kOutputFloor = 1e-15;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix z = x * layer.weights;
  z.rowwise() += layer.bias.transpose();
  return z;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------- scorer

std::vector<double> RiskScorer::risks(const CohortTable& cohort) const {
  std::vector<double> out(cohort.num_rows());
  for (std::size_t r = 0; r < cohort.num_rows(); ++r) out[r] = risk(cohort.row(r));
  return out;
}

// ---------------------------------------------------------------- params

MlpParams MlpParams::zeros() {
  MlpParams p;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto in = static_cast<Eigen::Index>(kLayerSizes[l]);
    const auto out = static_cast<Eigen::Index>(kLayerSizes[l + 1]);
    p.layers[l].weights = Matrix::Zero(in, out);
    p.layers[l].bias = Vector::Zero(out);
  }
  return p;
}

MlpParams MlpParams::random(std::uint64_t seed) {
  MlpParams p = zeros();
  Rng rng(derive_seed(seed, {hash_string("mlp-init")}));
  for (std::size_t l = 0; l < 3; ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(kLayerSizes[l])));
    auto& w = p.layers[l].weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
    }
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat.push_back(l.weights(r, c));
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat.push_back(l.bias(i));
  }
  return flat;
}

MlpParams MlpParams::unflatten(std::span<const double> flat) {
  MlpParams p = zeros();
  if (flat.size() != p.parameter_count()) throw std::invalid_argument("unflatten: wrong parameter count");
  std::size_t k = 0;
  for (auto& l : p.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat[k++];
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat[k++];
  }
  return p;
}

bool MlpParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

void MlpParams::validate() const {
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& layer = layers[l];
    if (static_cast<std::size_t>(layer.weights.rows()) != kLayerSizes[l] ||
        static_cast<std::size_t>(layer.weights.cols()) != kLayerSizes[l + 1] ||
        static_cast<std::size_t>(layer.bias.size()) != kLayerSizes[l + 1]) {
      throw std::invalid_argument("layer " + std::to_string(l) + " has the wrong shape");
    }
  }
  if (!all_finite()) throw std::invalid_argument("network parameters must be finite");
}

// ---------------------------------------------------------------- forward / backward

Vector forward_logits(const MlpParams& params, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != kNumFeatures) {
    throw std::invalid_argument("network input must have " + std::to_string(kNumFeatures) + " columns");
  }
  const Matrix a1 = relu(affine(x, params.layers[0]));
  const Matrix a2 = relu(affine(a1, params.layers[1]));
  return affine(a2, params.layers[2]).col(0);
}

double forward(const MlpParams& params, std::span<const double> x) {
  if (x.size() != kNumFeatures) {
    throw std::invalid_argument("forward: expected " + std::to_string(kNumFeatures) + " inputs, got " +
                                std::to_string(x.size()));
  }
  Matrix row(1, static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument("forward: non-finite input");
    row(0, static_cast<Eigen::Index>(i)) = x[i];
  }
  const double z = forward_logits(params, row)(0);
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(p, kOutputFloor, 1.0 - kOutputFloor);
}

LossAndGradient log_loss_gradient(const MlpParams& params, const Matrix& x,
                                  std::span<const std::uint8_t> labels) {
  const auto b = x.rows();
  if (static_cast<std::size_t>(b) != labels.size() || b == 0) {
    throw std::invalid_argument("log_loss_gradient: batch and labels differ");
  }
  const Matrix z1 = affine(x, params.layers[0]);
  const Matrix a1 = relu(z1);
  const Matrix z2 = affine(a1, params.layers[1]);
  const Matrix a2 = relu(z2);
  const Vector z3 = affine(a2, params.layers[2]).col(0);

  LossAndGradient out;
  out.gradient = MlpParams::zeros();
  const double inv_b = 1.0 / static_cast<double>(b);
  Matrix dz3(b, 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double y = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    loss += softplus(z3(i)) - y * z3(i);
    dz3(i, 0) = (1.0 / (1.0 + std::exp(-z3(i))) - y) * inv_b;
  }
  out.loss = loss * inv_b;

  auto& g = out.gradient.layers;
  g[2].weights = a2.transpose() * dz3;
  g[2].bias = dz3.colwise().sum().transpose();
  const Matrix dz2 = (dz3 * params.layers[2].weights.transpose()).cwiseProduct(
      (z2.array() > 0.0).cast<double>().matrix());
  g[1].weights = a1.transpose() * dz2;
  g[1].bias = dz2.colwise().sum().transpose();
  const Matrix dz1 = (dz2 * params.layers[1].weights.transpose()).cwiseProduct(
      (z1.array() > 0.0).cast<double>().matrix());
  g[0].weights = x.transpose() * dz1;
  g[0].bias = dz1.colwise().sum().transpose();
  return out;
}

double log_loss(const MlpParams& params, const Matrix& x, std::span<const std::uint8_t> labels) {
  const Vector z = forward_logits(params, x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z(i)) - (labels[static_cast<std::size_t>(i)] ? z(i) : 0.0);
  }
  return loss / static_cast<double>(z.size());
}

// ---------------------------------------------------------------- scaler

StandardScaler StandardScaler::fit(const Matrix& x) {
  StandardScaler s;
  const auto n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = (x.col(c).array() - mean).square().sum() / std::max(1.0, n);
    s.mean.push_back(mean);
    s.scale.push_back(var > 1e-24 ? std::sqrt(var) : 1.0);
  }
  return s;
}

Matrix StandardScaler::transform(const Matrix& x) const {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(c) = (x.col(c).array() - mean[static_cast<std::size_t>(c)]) / scale[static_cast<std::size_t>(c)];
  }
  return out;
}

void StandardScaler::transform_row(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / scale[c];
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0) || !(momentum > 0) || patience <= 0) {
    throw std::invalid_argument("training configuration values must be positive");
  }
  if (momentum >= 1.0) throw std::invalid_argument("momentum must be below 1");
  if (n_folds < 2) throw std::invalid_argument("n_folds must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in (0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},         {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"momentum", momentum},     {"patience", patience},     {"seed", seed},
          {"n_folds", n_folds},       {"validation_fraction", validation_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.n_folds = j.value("n_folds", c.n_folds);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.validate();
  return c;
}

// ---------------------------------------------------------------- model

RiskModel::RiskModel(StandardScaler scaler, MlpParams params, TrainConfig config)
    : scaler_(std::move(scaler)), params_(std::move(params)), config_(config) {
  params_.validate();
  if (scaler_.mean.size() != kNumFeatures || scaler_.scale.size() != kNumFeatures) {
    throw std::invalid_argument("risk model scaler must cover every feature");
  }
}

double RiskModel::risk(std::span<const double> features) const {
  if (features.size() != kNumFeatures) throw std::invalid_argument("risk: wrong feature count");
  std::array<double, kNumFeatures> z{};
  scaler_.transform_row(features, z);
  return forward(params_, z);
}

std::vector<double> RiskModel::predict(const CohortTable& cohort) const {
  const Vector logits = forward_logits(params_, scaler_.transform(cohort.feature_matrix()));
  std::vector<double> out(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out[static_cast<std::size_t>(i)] =
        std::clamp(1.0 / (1.0 + std::exp(-logits(i))), kOutputFloor, 1.0 - kOutputFloor);
  }
  return out;
}

nlohmann::json RiskModel::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params_.layers) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"inputs", l.weights.rows()},
                      {"outputs", l.weights.cols()},
                      {"weights", w},
                      {"bias", vector_json(l.bias)}});
  }
  return {{"format", "trustdss.risk_model"},
          {"version", 1},
          {"hidden_activation", "relu"},
          {"output_activation", "sigmoid"},
          {"layers", layers},
          {"input_scaler", {{"mean", scaler_.mean}, {"scale", scaler_.scale}}},
          {"train_config", config_.to_json()},
          {"epochs_trained", epochs_trained},
          {"best_validation_auc", best_validation_auc}};
}

RiskModel RiskModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "trustdss.risk_model" || j.value("version", 0) != 1) {
    throw DataError("not a version-1 risk model document");
  }
  MlpParams p = MlpParams::zeros();
  const auto& layers = j.at("layers");
  if (layers.size() != 3) throw DataError("risk model must have 3 layers");
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& lj = layers[l];
    const auto w = lj.at("weights").get<std::vector<double>>();
    auto& dst = p.layers[l];
    if (lj.at("inputs").get<std::size_t>() != MlpParams::kLayerSizes[l] ||
        lj.at("outputs").get<std::size_t>() != MlpParams::kLayerSizes[l + 1] ||
        w.size() != static_cast<std::size_t>(dst.weights.size())) {
      throw DataError("risk model layer " + std::to_string(l) + " has the wrong shape");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < dst.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < dst.weights.cols(); ++c) dst.weights(r, c) = w[k++];
    }
    dst.bias = json_vector(lj.at("bias"));
  }
  StandardScaler s;
  s.mean = j.at("input_scaler").at("mean").get<std::vector<double>>();
  s.scale = j.at("input_scaler").at("scale").get<std::vector<double>>();
  try {
    RiskModel m(std::move(s), std::move(p), TrainConfig::from_json(j.at("train_config")));
    m.epochs_trained = j.value("epochs_trained", 0);
    m.best_validation_auc = j.value("best_validation_auc", 0.0);
    return m;
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("risk model: ") + e.what());
  }
}

// ---------------------------------------------------------------- training

RiskModel train(const CohortTable& cohort, const TrainConfig& config) {
  config.validate();
  if (cohort.missing_count() > 0) throw std::invalid_argument("train: cohort must be fully imputed");
  const auto& y_all = cohort.outcomes();
  const auto positives = static_cast<std::size_t>(std::count(y_all.begin(), y_all.end(), 1));
  if (positives == 0 || positives == y_all.size()) {
    throw std::invalid_argument("train: cohort must contain both outcome classes");
  }

  // Early-stopping split; tiny cohorts fall back to monitoring the
  // training rows themselves.
  std::vector<std::size_t> fit_rows;
  std::vector<std::size_t> val_rows;
  const std::size_t minority = std::min(positives, y_all.size() - positives);
  if (minority >= 4) {
    auto split = stratified_holdout(y_all, config.validation_fraction,
                                    derive_seed(config.seed, {hash_string("early-stop")}));
    fit_rows = std::move(split.train);
    val_rows = std::move(split.test);
  } else {
    fit_rows.resize(y_all.size());
    std::iota(fit_rows.begin(), fit_rows.end(), std::size_t{0});
    val_rows = fit_rows;
  }

  const Matrix x_fit_raw = cohort.feature_matrix(fit_rows);
  StandardScaler scaler = StandardScaler::fit(x_fit_raw);
  const Matrix x_fit = scaler.transform(x_fit_raw);
  const Matrix x_val = scaler.transform(cohort.feature_matrix(val_rows));
  std::vector<std::uint8_t> y_fit(fit_rows.size());
  std::vector<std::uint8_t> y_val(val_rows.size());
  for (std::size_t i = 0; i < fit_rows.size(); ++i) y_fit[i] = y_all[fit_rows[i]];
  for (std::size_t i = 0; i < val_rows.size(); ++i) y_val[i] = y_all[val_rows[i]];

  MlpParams params = MlpParams::random(config.seed);
  std::vector<double> velocity(params.parameter_count(), 0.0);
  MlpParams best = params;
  double best_auc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  int epochs_run = 0;

  Rng shuffle_rng(derive_seed(config.seed, {hash_string("shuffle")}));
  std::vector<std::size_t> order(fit_rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  auto has_both = [](const std::vector<std::uint8_t>& y) {
    const auto pos = std::count(y.begin(), y.end(), 1);
    return pos > 0 && static_cast<std::size_t>(pos) < y.size();
  };
  const bool val_auc_defined = has_both(y_val);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Matrix xb(static_cast<Eigen::Index>(end - start), x_fit.cols());
      std::vector<std::uint8_t> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x_fit.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y_fit[order[i]];
      }
      const auto lg = log_loss_gradient(params, xb, yb);
      std::size_t k = 0;
      for (std::size_t l = 0; l < 3; ++l) {
        auto& w = params.layers[l].weights;
        const auto& gw = lg.gradient.layers[l].weights;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
          for (Eigen::Index c = 0; c < w.cols(); ++c, ++k) {
            velocity[k] = config.momentum * velocity[k] - config.learning_rate * gw(r, c);
            w(r, c) += velocity[k];
          }
        }
        auto& b = params.layers[l].bias;
        const auto& gb = lg.gradient.layers[l].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i, ++k) {
          velocity[k] = config.momentum * velocity[k] - config.learning_rate * gb(i);
          b(i) += velocity[k];
        }
      }
    }
    ++epochs_run;
    if (!params.all_finite()) break;

    const Vector logits = forward_logits(params, x_val);
    const std::vector<double> scores(logits.data(), logits.data() + logits.size());
    const double auc = val_auc_defined ? auc_roc(scores, y_val) : 0.0;
    const double loss = log_loss(params, x_val, y_val);
    if (auc > best_auc || (auc == best_auc && loss < best_loss)) {
      best_auc = auc;
      best_loss = loss;
      best = params;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  RiskModel model(std::move(scaler), std::move(best), config);
  model.epochs_trained = epochs_run;
  model.best_validation_auc = std::max(best_auc, 0.0);
  return model;
}

// ---------------------------------------------------------------- linear baseline

LinearModel::LinearModel(Vector coefficients) : coefficients_(std::move(coefficients)) {
  if (static_cast<std::size_t>(coefficients_.size()) != kNumFeatures + 1) {
    throw std::invalid_argument("linear model needs an intercept plus one coefficient per feature");
  }
}

double LinearModel::raw(std::span<const double> features) const {
  if (features.size() != kNumFeatures) throw std::invalid_argument("linear model: wrong feature count");
  double s = coefficients_(0);
  for (std::size_t i = 0; i < features.size(); ++i) s += coefficients_(static_cast<Eigen::Index>(i) + 1) * features[i];
  return s;
}

double LinearModel::risk(std::span<const double> features) const {
  return std::clamp(raw(features), 0.0, 1.0);
}

LinearModel train_linear_baseline(const CohortTable& cohort) {
  if (cohort.missing_count() > 0) throw std::invalid_argument("linear baseline: cohort must be fully imputed");
  if (cohort.num_rows() == 0) throw std::invalid_argument("linear baseline: empty cohort");
  Vector y(static_cast<Eigen::Index>(cohort.num_rows()));
  for (std::size_t r = 0; r < cohort.num_rows(); ++r) y(static_cast<Eigen::Index>(r)) = cohort.outcome(r);
  const OlsFit fit = fit_ols(cohort.feature_matrix(), y);
  LinearModel m(fit.coefficients);
  m.ridge_fallback = fit.rank_deficient;
  return m;
}

}  // namespace trustdss
