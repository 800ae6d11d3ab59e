#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace trustdss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Least-squares fit of y on [1, X]. coefficients(0) is the intercept.
struct OlsFit {
  Vector coefficients;
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;         // parameters including intercept
  bool rank_deficient = false;  // ridge fallback was used
  Matrix xtx_inverse;        // only filled when covariance was requested
};

inline constexpr double kRidgeFallbackLambda = 1e-6;

// Column-pivoting QR; when the design is rank deficient the normal equations
// are solved with a small ridge penalty on the slopes instead.
OlsFit fit_ols(const Matrix& x, const Vector& y, bool with_covariance = false,
               double ridge_lambda = kRidgeFallbackLambda);

// Prepends a column of ones.
Matrix with_intercept(const Matrix& x);

}  // namespace trustdss
