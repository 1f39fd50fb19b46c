#pragma once

#include <Eigen/Core>

#include "netstate/errors.hpp"

namespace netstate {

struct PcaModel {
  Eigen::VectorXd mean;                // n
  Eigen::MatrixXd components;          // n x k, orthonormal columns
  Eigen::VectorXd explained_variance;  // k, non-increasing
  double total_variance = 0.0;         // trace of the sample covariance
};

// Mean-centered eigendecomposition of the sample covariance (Gram trick when
// samples are scarcer than dimensions), top-k components by variance.
PcaModel fit_pca(const Eigen::MatrixXd& X, int k);

// components^T (X - mean), one projected column per sample.
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X);

}  // namespace netstate
