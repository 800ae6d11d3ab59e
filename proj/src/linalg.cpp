#include "trustdss/linalg.hpp"

#include <stdexcept>

namespace trustdss {

Matrix with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

OlsFit fit_ols(const Matrix& x, const Vector& y, bool with_covariance, double ridge_lambda) {
  if (x.rows() != y.size()) throw std::invalid_argument("fit_ols: row count mismatch");
  if (x.rows() == 0) throw std::invalid_argument("fit_ols: no rows");

  const Matrix design = with_intercept(x);
  OlsFit fit;
  fit.n = static_cast<std::size_t>(design.rows());
  fit.p = static_cast<std::size_t>(design.cols());

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const Matrix xtx = design.transpose() * design;
  if (qr.rank() == design.cols()) {
    fit.coefficients = qr.solve(y);
    if (with_covariance) fit.xtx_inverse = xtx.ldlt().solve(Matrix::Identity(xtx.rows(), xtx.cols()));
  } else {
    fit.rank_deficient = true;
    Matrix penalized = xtx;
    for (Eigen::Index i = 1; i < penalized.rows(); ++i) penalized(i, i) += ridge_lambda;
    // Keep the intercept solvable even when every row is identical.
    penalized(0, 0) += ridge_lambda * 1e-6;
    auto ldlt = penalized.ldlt();
    fit.coefficients = ldlt.solve(design.transpose() * y);
    if (with_covariance) fit.xtx_inverse = ldlt.solve(Matrix::Identity(xtx.rows(), xtx.cols()));
  }
  fit.rss = (design * fit.coefficients - y).squaredNorm();
  return fit;
}

}  // namespace trustdss
