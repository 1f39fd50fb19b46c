#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "netstate/traffic_domain.hpp"

namespace netstate {

// Time-ordered embedding of one simulated sequence: column t is the s-dim
// projection of the network state at step t.
struct Trajectory {
  std::string sequence_id;
  ScenarioLabel scenario = ScenarioLabel::ITD;
  Eigen::MatrixXd points;  // s x n_steps, non-negative
};

struct TrajectoryConfig {
  int n_restarts = 10;
  int max_swaps = 200;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct TrajectoryClustering {
  std::vector<int> labels;   // per trajectory
  std::vector<int> medoids;  // trajectory index per cluster; each belongs to its cluster
  double total_distance = 0.0;
  // Per cluster, the step-wise mean traffic index over member sequences;
  // filled by fill_mean_curves.
  std::vector<std::vector<double>> mean_curves;
};

// Groups the projection columns by sequence, in manifest order.
std::vector<Trajectory> build_trajectories(const Eigen::MatrixXd& projections,
                                           const TrafficStateMatrix& matrix,
                                           const SequenceManifest& manifest);

// 1 - mean step-wise cosine similarity. Non-negative points make every
// cosine land in [0,1], so the distance lands in [0,1] too: 0 for identical
// shapes, 1 for step-wise disjoint supports. A zero-norm point has no
// direction and is rejected.
double trajectory_distance(const Trajectory& a, const Trajectory& b);

Eigen::MatrixXd trajectory_distance_matrix(const std::vector<Trajectory>& trajectories,
                                           unsigned threads = 0);

// PAM-style K-medoids under trajectory_distance: distance-weighted random
// initialization, then steepest-descent swaps; best of n_restarts.
TrajectoryClustering cluster_trajectories(const std::vector<Trajectory>& trajectories, int k,
                                          const TrajectoryConfig& config);

// Per step, the traffic index averaged over all links of all listed
// sequences.
std::vector<double> mean_index_curve(const TrafficStateMatrix& matrix,
                                     const std::vector<std::string>& sequence_ids);

void fill_mean_curves(TrajectoryClustering& clustering, const TrafficStateMatrix& matrix,
                      const std::vector<Trajectory>& trajectories);

}  // namespace netstate
