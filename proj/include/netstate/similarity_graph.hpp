#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "netstate/traffic_domain.hpp"

namespace netstate {

// Per-link fusion weights over {self, upstream neighbors, downstream
// neighbors}. For every link the weights sum to 1 and the self weight is the
// strict maximum.
struct NeighborWeights {
  std::vector<double> self;
  std::vector<std::vector<double>> upstream;    // aligned with topology.upstream
  std::vector<std::vector<double>> downstream;  // aligned with topology.downstream

  // self_weight for the link itself, the remainder split equally among all
  // neighbors. Isolated links get self = 1; a lone neighbor would tie the
  // self weight, so the split is adjusted to keep self strictly largest.
  static NeighborWeights uniform(const NetworkTopology& topology, double self_weight = 0.5);

  void validate(const NetworkTopology& topology) const;
};

enum class VariationAggregation { kMean, kSum };

struct SimilarityConfig {
  // Gaussian kernel bandwidth; when unset, the median of all pairwise
  // aggregated variations divided by sqrt(2).
  std::optional<double> delta;
  // Keep only each sample's knn most similar partners (then symmetrize by
  // max). When unset, rows stay dense up to 500 samples and knn=10 beyond.
  std::optional<int> knn;
  bool auto_sparsify = true;
  VariationAggregation aggregation = VariationAggregation::kMean;
  unsigned threads = 0;

  void validate(std::int64_t m) const;
};

// Pairwise sample-similarity graph. The self-similarity diagonal is exactly 1
// by construction and carries no information, so `weights` stores only the
// off-diagonal part; degrees and the Laplacian are assembled from it, which
// leaves L identical to the unit-diagonal convention (the diagonal cancels in
// D - W).
struct SimilarityGraph {
  Eigen::SparseMatrix<double> weights;    // symmetric, zero diagonal, entries in (0,1]
  Eigen::VectorXd degrees;                // row sums of weights
  Eigen::SparseMatrix<double> laplacian;  // diag(degrees) - weights
  double delta = 0.0;
  bool sparsified = false;

  std::int64_t m() const { return weights.rows(); }
  // Full similarity matrix with the unit diagonal restored.
  Eigen::MatrixXd dense_similarity() const;
};

// Element-wise absolute difference of two states.
Eigen::VectorXd linkwise_difference(const Eigen::VectorXd& state_a,
                                    const Eigen::VectorXd& state_b);

// Weighted fusion of a difference vector over each link's neighborhood.
Eigen::VectorXd local_variation(const Eigen::VectorXd& diff, const NetworkTopology& topology,
                                const NeighborWeights& weights);

// Builds W, D, L from all column pairs: aggregate the local variation over
// links, then map through exp(-v / (2 delta^2)).
SimilarityGraph pairwise_similarity(const TrafficStateMatrix& matrix,
                                    const NetworkTopology& topology,
                                    const NeighborWeights& weights,
                                    const SimilarityConfig& config);

// Builds a graph directly from a ready off-diagonal similarity matrix
// (degrees and Laplacian assembled consistently). Diagonal entries are
// ignored.
SimilarityGraph graph_from_similarity(const Eigen::MatrixXd& similarity);

double laplacian_quadratic(const Eigen::MatrixXd& projections,
                           const Eigen::SparseMatrix<double>& laplacian);

// Content hash used to key the similarity cache: covers the state values,
// topology, fusion weights and the similarity configuration.
std::uint64_t similarity_content_hash(const TrafficStateMatrix& matrix,
                                      const NetworkTopology& topology,
                                      const NeighborWeights& weights,
                                      const SimilarityConfig& config);

void save_similarity_cache(const std::filesystem::path& path, const SimilarityGraph& graph,
                           std::uint64_t content_hash);

// Returns the cached graph when the stored hash matches, nullopt otherwise.
std::optional<SimilarityGraph> load_similarity_cache(const std::filesystem::path& path,
                                                     std::uint64_t expected_hash);

}  // namespace netstate
