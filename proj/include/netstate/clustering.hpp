#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "netstate/traffic_domain.hpp"

namespace netstate {

struct ClusteringConfig {
  int k = 5;
  int n_restarts = 10;
  int max_iters = 300;
  std::uint64_t seed = 0;
  double congestion_threshold = 0.79;  // exemplar links below this are flagged
  double exemplar_fraction = 0.30;     // most-congested share averaged per exemplar
  unsigned threads = 0;

  void validate(std::int64_t m) const;
};

struct ClusterAssignment {
  std::vector<int> labels;    // per sample, in [0, k)
  Eigen::MatrixXd centroids;  // dim x k
  double inertia = 0.0;       // sum of squared distances to assigned centroids
  std::vector<int> counts;    // per cluster, all > 0
  int iters_run = 0;
};

struct CompactnessReport {
  double compactness = 0.0;               // mean of per-cluster sample variances
  std::vector<double> cluster_variances;  // singleton clusters contribute 0
  std::vector<int> counts;
};

struct KSelection {
  std::vector<int> candidates;
  std::vector<CompactnessReport> reports;
  std::vector<ClusterAssignment> assignments;
  int recommended = 0;
};

struct ClusterExemplar {
  int cluster = 0;
  Eigen::VectorXd mean_state;           // link-wise average of the selected members
  std::vector<LinkId> congested_links;  // exemplar value below the threshold
};

// Lloyd iterations with distance-weighted probabilistic seeding, best of
// n_restarts by inertia (ties to the lowest restart index). Empty clusters
// are repaired by donating the point farthest from its centroid.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, const ClusteringConfig& config);

// Mean of per-cluster sample variances, computed on the original
// network-level observations: variance_i = 1/(N_i - 1) sum ||nd_j - mean_i||^2.
CompactnessReport compactness(const Eigen::MatrixXd& original_states,
                              const std::vector<int>& labels);

// Clusters the embeddings for every candidate K, evaluates compactness on the
// original states, and recommends the smallest K after which the relative
// improvement drops under improvement_threshold.
KSelection select_k(const Eigen::MatrixXd& original_states, const Eigen::MatrixXd& embeddings,
                    const std::vector<int>& candidate_k, const ClusteringConfig& config,
                    double improvement_threshold = 0.05);

// Link-wise average over the exemplar_fraction most congested member states
// (ranked by mean traffic index ascending); links with exemplar values under
// congestion_threshold form the cluster's congestion geography.
ClusterExemplar extract_exemplar(const Eigen::MatrixXd& original_states,
                                 const std::vector<int>& labels, int cluster,
                                 const ClusteringConfig& config);

// Fraction of samples whose cluster matches the dominant class of that
// cluster; the standard external clustering purity in [0,1].
double clustering_purity(const std::vector<int>& labels, const std::vector<int>& classes);

}  // namespace netstate
