#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "netstate/similarity_graph.hpp"

namespace netstate {

struct FactorizationConfig {
  int s = 7;                 // projection dimension
  double lambda = 1.0;       // locality-preserving regularization weight
  int max_iters = 1000;
  double rel_tol = 1e-6;     // relative objective decrease threshold
  std::uint64_t seed = 0;
  double epsilon = 1e-12;    // denominator floor for the multiplicative updates

  void validate(std::int64_t n, std::int64_t m) const;
};

struct FactorizationResult {
  Eigen::MatrixXd basis;        // n x s, non-negative (spatial patterns)
  Eigen::MatrixXd projections;  // s x m, non-negative (per-sample embedding)
  // Objective per iteration; [0] holds the value at initialization. The
  // objective is the squared Frobenius reconstruction error plus
  // lambda * Tr(V L V^T), and the two addends are traced separately.
  std::vector<double> objective_trace;
  std::vector<double> reconstruction_trace;
  std::vector<double> laplacian_trace;
  int iters_run = 0;
  bool converged = false;
};

struct DimensionSelection {
  std::vector<int> candidates;
  std::vector<double> errors;  // Frobenius reconstruction error per candidate
  int recommended = 0;
};

struct BasisImportanceReport {
  std::vector<double> importance;           // row-wise average of projections
  std::vector<int> ranking;                 // basis indices, most important first
  std::vector<std::vector<LinkId>> top_links;  // per basis, top-fraction entries
  double top_fraction = 0.2;
};

// Alternating multiplicative updates for
//   min_{M,V >= 0} ||X - MV||_F^2 + lambda Tr(V L V^T).
// graph may be null when lambda == 0. The objective is non-increasing per
// iteration; iteration stops at max_iters or after the relative decrease
// stays below rel_tol for 5 consecutive iterations.
FactorizationResult factorize(const Eigen::MatrixXd& X, const SimilarityGraph* graph,
                              const FactorizationConfig& config);

// ||X - MV||_F (not squared).
double reconstruction_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& basis,
                            const Eigen::MatrixXd& projections);

// Non-negative least squares of one new state onto a learned basis,
// multiplicative updates with the basis held fixed.
Eigen::VectorXd project(const Eigen::MatrixXd& basis, const Eigen::VectorXd& state,
                        const FactorizationConfig& config);

// Fits every candidate dimension and recommends the smallest one whose
// marginal error decrease drops below drop_fraction of the mean of all
// earlier marginal decreases (elbow rule). Falls back to the last candidate
// when the rule never fires.
DimensionSelection select_dimension(const Eigen::MatrixXd& X, const SimilarityGraph* graph,
                                    const std::vector<int>& candidate_s,
                                    const FactorizationConfig& config,
                                    double drop_fraction = 0.20);

// Row-wise averages of the projections rank basis vectors by how much they
// contribute across the sample set; per basis, the links carrying the
// top-fraction largest loadings localize the pattern.
BasisImportanceReport basis_importance(const FactorizationResult& result,
                                       double top_fraction = 0.20);

// Number of entries flagged by a top-fraction rule over n items.
std::size_t top_entry_count(std::size_t n, double fraction);

}  // namespace netstate
