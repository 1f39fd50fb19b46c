#include "netstate/pca_baseline.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace netstate {

PcaModel fit_pca(const Eigen::MatrixXd& X, int k) {
  const std::int64_t n = X.rows();
  const std::int64_t m = X.cols();
  if (m < 2) throw DataError("pca: need at least 2 samples");
  if (k < 1 || k > std::min(n, m))
    throw ConfigError("pca: k = " + std::to_string(k) + " out of range [1, " +
                      std::to_string(std::min(n, m)) + "]");

  PcaModel model;
  model.mean = X.rowwise().mean();
  const Eigen::MatrixXd centered = X.colwise() - model.mean;
  const double denom = static_cast<double>(m - 1);
  model.total_variance = centered.squaredNorm() / denom;

  model.components.resize(n, k);
  model.explained_variance.resize(k);

  if (n <= m) {
    const Eigen::MatrixXd cov = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    // Eigen returns ascending eigenvalues; take the top k from the back.
    for (int i = 0; i < k; ++i) {
      const std::int64_t src = n - 1 - i;
      model.explained_variance(i) = std::max(eig.eigenvalues()(src), 0.0);
      model.components.col(i) = eig.eigenvectors().col(src);
    }
  } else {
    // Gram trick: eigenvectors u of (Xc^T Xc)/denom lift to Xc u / sqrt(denom * lambda).
    const Eigen::MatrixXd gram = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    for (int i = 0; i < k; ++i) {
      const std::int64_t src = m - 1 - i;
      const double lambda = std::max(eig.eigenvalues()(src), 0.0);
      model.explained_variance(i) = lambda;
      if (lambda > 1e-14 * std::max(model.total_variance, 1.0)) {
        model.components.col(i) =
            centered * eig.eigenvectors().col(src) / std::sqrt(denom * lambda);
      } else {
        model.components.col(i).setZero();  // degenerate direction, variance 0
      }
    }
  }
  return model;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.rows() != model.mean.size())
    throw DataError("pca project: state dimension " + std::to_string(X.rows()) +
                    " does not match model dimension " + std::to_string(model.mean.size()));
  return model.components.transpose() * (X.colwise() - model.mean);
}

}  // namespace netstate
